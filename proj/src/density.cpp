#include "covar/density.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covar/error.hpp"

namespace covar {

namespace {

std::vector<Expr> jacobian_exprs(const std::vector<Expr>& f, int dim) {
  std::vector<Expr> j;
  j.reserve(f.size() * dim);
  for (const Expr& e : f)
    for (int a = 0; a < dim; ++a) j.push_back(differentiate(e, a));
  return j;
}

Matrix eval_matrix(const std::vector<Expr>& m, int dim, std::span<const double> x) {
  Matrix out{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) out[i][j] = m[i * dim + j].eval(x);
  return out;
}

Expr expr_determinant(const std::vector<Expr>& m, int dim, std::vector<int> rows, int col) {
  if (col == dim) return Expr::constant(1.0);
  Expr acc;
  double sign = 1.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Expr& entry = m[rows[k] * dim + col];
    if (!entry.is_constant(0.0)) {
      std::vector<int> rest = rows;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      const Expr term = entry * expr_determinant(m, dim, std::move(rest), col + 1);
      acc = sign > 0 ? acc + term : acc - term;
    }
    sign = -sign;
  }
  return acc;
}

double axis_distance(const CoordinateChart& chart, int axis, double a, double b) {
  double diff = std::abs(a - b);
  if (chart.periodic(axis)) {
    const double period = chart.upper(axis) - chart.lower(axis);
    diff = std::fmod(diff, period);
    diff = std::min(diff, period - diff);
  }
  return diff;
}

std::string point_string(std::span<const double> x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

ChartMap::ChartMap(CoordinateChart source, CoordinateChart target, std::vector<Expr> forward,
                   std::vector<Expr> inverse, int check_points, std::uint64_t seed)
    : source_(std::move(source)),
      target_(std::move(target)),
      forward_(std::move(forward)),
      inverse_(std::move(inverse)) {
  const int d = source_.dim();
  if (target_.dim() != d) throw GeometryError("chart map must preserve the dimension");
  if (static_cast<int>(forward_.size()) != d || static_cast<int>(inverse_.size()) != d)
    throw GeometryError("chart map needs one forward and one inverse expression per coordinate");
  forward_jac_ = jacobian_exprs(forward_, d);
  inverse_jac_ = jacobian_exprs(inverse_, d);
  forward_jac_target_.reserve(forward_jac_.size());
  for (const Expr& e : forward_jac_) forward_jac_target_.push_back(substitute(e, inverse_));

  auto check = [&](const CoordinateChart& from, bool from_source, std::uint64_t s) {
    for (const auto& p : random_points(from, check_points, s)) {
      const std::span<const double> x(p.data(), d);
      const auto y = from_source ? to_target(x) : to_source(x);
      const auto back = from_source ? to_source(std::span<const double>(y.data(), d))
                                    : to_target(std::span<const double>(y.data(), d));
      for (int a = 0; a < d; ++a) {
        const double err = axis_distance(from, a, back[a], x[a]) / std::max(1.0, std::abs(x[a]));
        round_trip_error_ = std::max(round_trip_error_, err);
        if (!(err <= kRoundTripTolerance))
          throw GeometryError("chart map round trip fails at " + point_string(x) +
                              ": relative error " + std::to_string(err));
      }
      const Matrix j = from_source ? forward_jacobian(x) : inverse_jacobian(x);
      const double det = determinant(j, d);
      if (!(std::abs(det) > 1e-14) || !std::isfinite(det))
        throw GeometryError("chart map Jacobian is singular at " + point_string(x));
    }
  };
  check(target_, false, seed);
  check(source_, true, seed + 1);
}

std::array<double, kMaxDim> ChartMap::to_target(std::span<const double> x) const {
  std::array<double, kMaxDim> y{};
  for (std::size_t i = 0; i < forward_.size(); ++i) y[i] = forward_[i].eval(x);
  return y;
}

std::array<double, kMaxDim> ChartMap::to_source(std::span<const double> xp) const {
  std::array<double, kMaxDim> y{};
  for (std::size_t i = 0; i < inverse_.size(); ++i) y[i] = inverse_[i].eval(xp);
  return y;
}

Matrix ChartMap::forward_jacobian(std::span<const double> x) const {
  return eval_matrix(forward_jac_, source_.dim(), x);
}

Matrix ChartMap::inverse_jacobian(std::span<const double> xp) const {
  return eval_matrix(inverse_jac_, source_.dim(), xp);
}

ChartMap compose(const ChartMap& first, const ChartMap& second) {
  if (!first.target().same_coordinates(second.source()))
    throw GeometryError("cannot compose chart maps: intermediate charts differ");
  std::vector<Expr> fwd, inv;
  for (const Expr& e : second.forward()) fwd.push_back(substitute(e, first.forward()));
  for (const Expr& e : first.inverse()) inv.push_back(substitute(e, second.inverse()));
  return ChartMap(first.source(), second.target(), std::move(fwd), std::move(inv));
}

TensorDensityField transform_density(const TensorDensityField& t, const ChartMap& map) {
  if (!t.chart().same_coordinates(map.source()))
    throw PreconditionError("field chart does not match the chart map's source");
  if (!t.is_analytic())
    throw PreconditionError("transform_density needs an analytic field; sampled fields cannot be "
                            "re-gridded onto the target chart");
  const int d = t.dim(), rank = t.rank();
  const double w = t.weight();
  const IndexSignature sig = t.signature();
  const int comps = t.components();

  if (const auto* exprs = t.expressions()) {
    const auto& jinv = map.inverse_jacobian_exprs();
    const auto& jfwd = map.forward_jacobian_on_target();
    Expr factor = Expr::constant(1.0);
    if (w != 0.0) {
      std::vector<int> rows(d);
      for (int i = 0; i < d; ++i) rows[i] = i;
      factor = pow(apply(Function::Abs, expr_determinant(jinv, d, rows, 0)), w);
    }
    std::vector<Expr> pulled;
    pulled.reserve(comps);
    for (const Expr& e : *exprs) pulled.push_back(substitute(e, map.inverse()));
    std::vector<Expr> out(comps);
    std::array<int, 8> mu{}, a{};
    for (int c = 0; c < comps; ++c) {
      unflat_index(c, rank, d, std::span<int>(mu.data(), rank));
      Expr acc;
      for (int s = 0; s < comps; ++s) {
        if (pulled[s].is_constant(0.0)) continue;
        unflat_index(s, rank, d, std::span<int>(a.data(), rank));
        Expr term = pulled[s];
        bool zero = false;
        for (int k = 0; k < rank && !zero; ++k) {
          const Expr& j = sig[k] == Slot::Up ? jfwd[mu[k] * d + a[k]] : jinv[a[k] * d + mu[k]];
          zero = j.is_constant(0.0);
          term = j * term;
        }
        if (!zero) acc = acc + term;
      }
      out[c] = factor * acc;
    }
    return TensorDensityField::from_expressions(map.target(), sig, w, std::move(out));
  }

  auto evaluator = [t, map, d, rank, w, sig, comps](std::span<const double> xp,
                                                     std::span<Jet> out) {
    const auto x = map.to_source(xp);
    const auto vals = t.values_at(std::span<const double>(x.data(), d));
    const Matrix jf = map.forward_jacobian(std::span<const double>(x.data(), d));
    const Matrix ji = map.inverse_jacobian(xp);
    const double factor = w == 0.0 ? 1.0 : std::pow(std::abs(determinant(ji, d)), w);
    std::array<int, 8> mu{}, a{};
    for (int c = 0; c < comps; ++c) {
      unflat_index(c, rank, d, std::span<int>(mu.data(), rank));
      double acc = 0.0;
      for (int s = 0; s < comps; ++s) {
        unflat_index(s, rank, d, std::span<int>(a.data(), rank));
        double term = vals[s];
        for (int k = 0; k < rank; ++k)
          term *= sig[k] == Slot::Up ? jf[mu[k]][a[k]] : ji[a[k]][mu[k]];
        acc += term;
      }
      out[c] = Jet::opaque(factor * acc);
    }
  };
  return TensorDensityField::from_evaluator(map.target(), sig, w, evaluator, false);
}

MetricField transform_metric(const MetricField& m, const ChartMap& map) {
  if (!m.is_analytic()) throw PreconditionError("transform_metric needs an analytic metric");
  const auto g = transform_density(metric_tensor(m), map);
  return MetricField::from_expressions(map.target(), *g.expressions(), m.signature(),
                                       m.det_epsilon());
}

DeterminantReport determinant_weight_check(const MetricField& m, const ChartMap& map, int points,
                                           std::uint64_t seed) {
  const MetricField mp = transform_metric(m, map);
  const int d = m.dim();
  DeterminantReport r{0.0, points};
  for (const auto& p : random_points(map.target(), points, seed)) {
    const std::span<const double> xp(p.data(), d);
    const auto x = map.to_source(xp);
    const double jac = determinant(map.inverse_jacobian(xp), d);
    const double expected = jac * jac * m.at(std::span<const double>(x.data(), d)).det;
    const double got = mp.at(xp).det;
    r.max_relative_deviation =
        std::max(r.max_relative_deviation, std::abs(got - expected) / std::abs(expected));
  }
  return r;
}

TensorDensityField normalize_weight(const TensorDensityField& t, const MetricField& m) {
  if (t.weight() == 0.0) return t;
  return densitize(t, m, -t.weight());
}

TensorDensityField restore_weight(const TensorDensityField& t, const MetricField& m,
                                  double weight) {
  if (t.weight() != 0.0)
    throw PreconditionError("restore_weight expects a weight-0 field");
  if (weight == 0.0) return t;
  return densitize(t, m, weight);
}

}  // namespace covar
