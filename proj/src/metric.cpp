#include "covar/metric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "covar/error.hpp"

namespace covar {

std::string_view channel_name(Channel c) {
  return c == Channel::Analytic ? "analytic" : "finite-difference";
}

Jet MetricPointData::g_jet(int m, int n) const {
  Jet j{g[m][n], {}};
  for (int l = 0; l < dim; ++l) j.d[l] = dg[l][m][n];
  return j;
}

Jet MetricPointData::ginv_jet(int m, int n) const {
  Jet j{ginv[m][n], {}};
  for (int l = 0; l < dim; ++l) j.d[l] = dginv[l][m][n];
  return j;
}

Jet MetricPointData::sqrt_det_jet() const {
  Jet j{sqrt_det, {}};
  for (int l = 0; l < dim; ++l) j.d[l] = d_sqrt_det[l];
  return j;
}

namespace {

template <class T>
using Square = std::array<std::array<T, kMaxDim>, kMaxDim>;

template <class T>
Square<T> minor_of(const Square<T>& a, int dim, int row, int col) {
  Square<T> m{};
  for (int i = 0, mi = 0; i < dim; ++i) {
    if (i == row) continue;
    for (int j = 0, mj = 0; j < dim; ++j) {
      if (j == col) continue;
      m[mi][mj++] = a[i][j];
    }
    ++mi;
  }
  return m;
}

template <class T>
T det_impl(const Square<T>& a, int dim) {
  if (dim == 1) return a[0][0];
  if (dim == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  T acc = a[0][0] * det_impl(minor_of(a, dim, 0, 0), dim - 1);
  for (int j = 1; j < dim; ++j) {
    const T term = a[0][j] * det_impl(minor_of(a, dim, 0, j), dim - 1);
    if (j % 2) acc = acc - term;
    else acc = acc + term;
  }
  return acc;
}

// Inverse by adjugate; `det` is the signed determinant of a.
template <class T>
Square<T> inverse_impl(const Square<T>& a, int dim, const T& det) {
  Square<T> inv{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      T cof = det_impl(minor_of(a, dim, i, j), dim - 1);
      if ((i + j) % 2) cof = T{} - cof;
      inv[j][i] = cof / det;
    }
  return inv;
}

std::string point_string(std::span<const double> x, int dim) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (int i = 0; i < dim; ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

bool is_diagonal(const Matrix& a, int dim) {
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      if (i != j && a[i][j] != 0.0) return false;
  return true;
}

}  // namespace

Jet determinant(const std::array<std::array<Jet, kMaxDim>, kMaxDim>& a, int dim) {
  return det_impl(a, dim);
}

double determinant(const Matrix& a, int dim) { return det_impl(a, dim); }

Signature signature_of(const Matrix& a, int dim) {
  Signature s;
  auto count = [&s](double ev) {
    if (ev < 0.0) ++s.negative;
    else if (ev > 0.0) ++s.positive;
  };
  if (is_diagonal(a, dim)) {
    for (int i = 0; i < dim; ++i) count(a[i][i]);
    return s;
  }
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = a[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  for (int i = 0; i < dim; ++i) count(solver.eigenvalues()(i));
  return s;
}

// ---- MetricField ---------------------------------------------------------------------

struct MetricField::Impl {
  CoordinateChart chart;
  Signature signature;
  double det_epsilon = kDefaultDetEpsilon;

  // analytic channel
  bool analytic = true;
  std::vector<Expr> components;                  // row-major dim x dim, symmetric
  std::vector<Expr> derivatives;                 // [l][m][n]

  // finite-difference channel
  std::optional<SampledField> g_samples;          // rank 2
  std::optional<SampledField> sqrt_det_samples;   // rank 0
  std::optional<DifferenceOperator> diff;

  explicit Impl(CoordinateChart c) : chart(std::move(c)) {}

  void check_point(const Matrix& g, double det, int dim, const std::string& where) const {
    if (!(det > det_epsilon)) {
      std::ostringstream os;
      os << "degenerate metric: |det g| = " << det << " <= " << det_epsilon << " at " << where;
      throw GeometryError(os.str());
    }
    const Signature s = signature_of(g, dim);
    if (!(s == signature)) {
      std::ostringstream os;
      os << "metric signature (" << s.negative << " negative, " << s.positive
         << " positive) does not match declared (" << signature.negative << ", "
         << signature.positive << ") at " << where;
      throw GeometryError(os.str());
    }
  }
};

MetricField MetricField::from_expressions(CoordinateChart chart, std::vector<Expr> components,
                                          Signature signature, double det_epsilon) {
  const int d = chart.dim();
  if (static_cast<int>(components.size()) != d * d)
    throw PreconditionError("metric needs " + std::to_string(d * d) + " component expressions");
  if (signature.negative + signature.positive != d)
    throw PreconditionError("declared signature does not add up to the chart dimension");
  auto impl = std::make_shared<Impl>(std::move(chart));
  impl->signature = signature;
  impl->det_epsilon = det_epsilon;
  impl->analytic = true;
  impl->components.resize(d * d);
  for (int m = 0; m < d; ++m)
    for (int n = m; n < d; ++n) {
      const Expr& upper = components[m * d + n];
      const Expr& lower = components[n * d + m];
      Expr sym = upper.str() == lower.str() ? upper
                                            : Expr::constant(0.5) * (upper + lower);
      impl->components[m * d + n] = sym;
      impl->components[n * d + m] = sym;
    }
  impl->derivatives.resize(d * d * d);
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m)
      for (int n = m; n < d; ++n) {
        Expr der = differentiate(impl->components[m * d + n], l);
        impl->derivatives[(l * d + m) * d + n] = der;
        impl->derivatives[(l * d + n) * d + m] = der;
      }
  return MetricField(std::move(impl));
}

MetricField MetricField::from_samples(const SampledField& g, Signature signature,
                                      double det_epsilon) {
  const GridSpec& grid = g.grid();
  const int d = grid.dim();
  if (g.rank() != 2) throw PreconditionError("sampled metric must be rank 2");
  if (signature.negative + signature.positive != d)
    throw PreconditionError("declared signature does not add up to the chart dimension");

  std::vector<double> sym(g.values().begin(), g.values().end());
  std::vector<double> sqrt_det(grid.size());
  auto impl = std::make_shared<Impl>(grid.chart());
  impl->signature = signature;
  impl->det_epsilon = det_epsilon;
  impl->analytic = false;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    double* gn = sym.data() + node * d * d;
    Matrix m{};
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        const double v = 0.5 * (gn[a * d + b] + gn[b * d + a]);
        gn[a * d + b] = gn[b * d + a] = v;
        m[a][b] = m[b][a] = v;
      }
    const double det = std::abs(determinant(m, d));
    const auto x = grid.coordinates(node);
    impl->check_point(m, det, d, point_string(x, d));
    sqrt_det[node] = std::sqrt(det);
  }
  impl->g_samples.emplace(grid, 2, std::move(sym));
  impl->sqrt_det_samples.emplace(grid, 0, std::move(sqrt_det));
  impl->diff.emplace(grid);
  return MetricField(std::move(impl));
}

bool MetricField::is_analytic() const { return impl_->analytic; }
const CoordinateChart& MetricField::chart() const { return impl_->chart; }
Signature MetricField::signature() const { return impl_->signature; }
double MetricField::det_epsilon() const { return impl_->det_epsilon; }
const GridSpec* MetricField::grid() const {
  return impl_->analytic ? nullptr : &impl_->g_samples->grid();
}

const Expr& MetricField::component(int m, int n) const {
  if (!impl_->analytic) throw PreconditionError("sampled metric has no component expressions");
  return impl_->components[m * dim() + n];
}

MetricPointData MetricField::at(std::span<const double> x) const {
  if (!impl_->analytic)
    throw PreconditionError("sampled metric can only be evaluated at lattice nodes");
  const CoordinateChart& chart = impl_->chart;
  const int d = chart.dim();
  if (static_cast<int>(x.size()) < d) throw PreconditionError("point has too few coordinates");
  for (int a = 0; a < d; ++a) {
    if (chart.periodic(a)) continue;
    const double slack = 1e-9 * (chart.upper(a) - chart.lower(a));
    if (x[a] < chart.lower(a) - slack || x[a] > chart.upper(a) + slack)
      throw PreconditionError("point " + point_string(x, d) + " lies outside the chart bounds");
  }

  Square<Jet> gj{};
  for (int m = 0; m < d; ++m)
    for (int n = m; n < d; ++n) {
      Jet j{impl_->components[m * d + n].eval(x), {}};
      for (int l = 0; l < d; ++l) j.d[l] = impl_->derivatives[(l * d + m) * d + n].eval(x);
      gj[m][n] = gj[n][m] = j;
    }
  const Jet det_signed = determinant(gj, d);
  const Jet det = abs(det_signed);

  MetricPointData out;
  out.dim = d;
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      out.g[m][n] = gj[m][n].v;
      for (int l = 0; l < d; ++l) out.dg[l][m][n] = gj[m][n].d[l];
    }
  out.det = det.v;
  impl_->check_point(out.g, out.det, d, point_string(x, d));

  const Square<Jet> inv = inverse_impl(gj, d, det_signed);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) {
      out.ginv[m][n] = inv[m][n].v;
      for (int l = 0; l < d; ++l) out.dginv[l][m][n] = inv[m][n].d[l];
    }
  const Jet root = sqrt(det);
  out.sqrt_det = root.v;
  for (int l = 0; l < d; ++l) out.d_sqrt_det[l] = root.d[l];
  return out;
}

MetricPointData MetricField::at_node(std::size_t node) const {
  if (impl_->analytic)
    throw PreconditionError("analytic metric has no lattice; use at() or sampled_on()");
  const SampledField& gs = *impl_->g_samples;
  const int d = gs.grid().dim();
  MetricPointData out;
  out.dim = d;
  const auto gn = gs.node(node);
  for (int m = 0; m < d; ++m)
    for (int n = 0; n < d; ++n) out.g[m][n] = gn[m * d + n];

  std::array<double, kMaxDim * kMaxDim> buf{};
  for (int l = 0; l < d; ++l) {
    impl_->diff->apply(gs, node, l, std::span<double>(buf.data(), d * d));
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) out.dg[l][m][n] = buf[m * d + n];
  }
  const double det_signed = determinant(out.g, d);
  out.det = std::abs(det_signed);
  out.ginv = inverse_impl(out.g, d, det_signed);
  out.sqrt_det = impl_->sqrt_det_samples->at(node, 0);
  for (int l = 0; l < d; ++l) {
    double v = 0.0;
    impl_->diff->apply(*impl_->sqrt_det_samples, node, l, std::span<double>(&v, 1));
    out.d_sqrt_det[l] = v;
  }
  // (g^{-1})_{,l} = -g^{-1} g_{,l} g^{-1}
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) {
        double acc = 0.0;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) acc += out.ginv[m][a] * out.dg[l][a][b] * out.ginv[b][n];
        out.dginv[l][m][n] = -acc;
      }
  return out;
}

MetricField MetricField::sampled_on(const GridSpec& grid) const {
  if (!impl_->analytic) {
    if (*this->grid() == grid) return *this;
    throw PreconditionError("sampled metric lives on a different grid");
  }
  if (!grid.chart().same_coordinates(impl_->chart))
    throw PreconditionError("grid chart does not match the metric chart");
  return from_samples(sample(impl_->components, 2, grid), impl_->signature, impl_->det_epsilon);
}

MetricField MetricField::with_chart(CoordinateChart chart) const {
  if (!impl_->analytic) throw PreconditionError("cannot re-chart a sampled metric");
  if (!chart.same_coordinates(impl_->chart))
    throw PreconditionError("new chart must use the same coordinate names");
  auto impl = std::make_shared<Impl>(*impl_);
  impl->chart = std::move(chart);
  return MetricField(std::move(impl));
}

// ---- presets ----------------------------------------------------------------------------

namespace {

constexpr double kPi = std::numbers::pi;

double preset_mass(const PresetParams& params) {
  double mass = 1.0;
  if (auto it = params.values.find("M"); it != params.values.end()) {
    const Expr e = parse(it->second, SymbolTable{});
    mass = e.eval({});
  }
  if (!(mass > 0.0)) throw PreconditionError("schwarzschild mass must be positive");
  return mass;
}

std::vector<std::vector<double>> merge_singular(const CoordinateChart& user,
                                                const CoordinateChart& preset) {
  auto out = std::vector<std::vector<double>>(user.dim());
  for (int a = 0; a < user.dim(); ++a) {
    out[a] = user.singular(a);
    for (double s : preset.singular(a)) out[a].push_back(s);
  }
  return out;
}

}  // namespace

CoordinateChart preset_chart(std::string_view name, const PresetParams& params) {
  if (name == "minkowski4")
    return CoordinateChart({"t", "x", "y", "z"}, {0, 0, 0, 0}, {1, 1, 1, 1});
  if (name == "polar2")
    return CoordinateChart({"r", "theta"}, {1.0, 0.0}, {2.0, 2 * kPi}, {false, true}, {{0.0}, {}});
  if (name == "spherical3")
    return CoordinateChart({"r", "theta", "phi"}, {1.0, 0.1, 0.0}, {2.0, kPi - 0.1, 2 * kPi},
                           {false, false, true}, {{0.0}, {0.0, kPi}, {}});
  if (name == "static_spherical")
    return CoordinateChart({"t", "r", "theta", "phi"}, {0.0, 1.0, 0.1, 0.0},
                           {1.0, 2.0, kPi - 0.1, 2 * kPi}, {false, false, false, true},
                           {{}, {0.0}, {0.0, kPi}, {}});
  if (name == "schwarzschild") {
    const double m = preset_mass(params);
    return CoordinateChart({"t", "r", "theta", "phi"}, {0.0, 3.0 * m, 0.1, 0.0},
                           {1.0, 10.0 * m, kPi - 0.1, 2 * kPi}, {false, false, false, true},
                           {{}, {0.0, 2.0 * m}, {0.0, kPi}, {}});
  }
  throw PreconditionError("unknown metric preset '" + std::string(name) + "'");
}

MetricField preset(std::string_view name, const PresetParams& params,
                   std::optional<CoordinateChart> chart) {
  const CoordinateChart base = preset_chart(name, params);
  CoordinateChart use = base;
  if (chart) {
    if (!chart->same_coordinates(base))
      throw PreconditionError("preset '" + std::string(name) + "' uses coordinates that differ "
                              "from the supplied chart");
    std::vector<double> lo(base.dim()), hi(base.dim());
    std::vector<bool> per(base.dim());
    for (int a = 0; a < base.dim(); ++a) {
      lo[a] = chart->lower(a);
      hi[a] = chart->upper(a);
      per[a] = chart->periodic(a);
    }
    use = CoordinateChart(base.names(), lo, hi, per, merge_singular(*chart, base));
  }
  const SymbolTable symbols = use.symbols();
  auto sym = [&](const char* s) { return Expr::symbol(use.axis_of(s), s); };
  auto c = [](double v) { return Expr::constant(v); };

  if (name == "minkowski4") {
    std::vector<Expr> g(16, c(0.0));
    g[0] = c(-1.0);
    g[5] = g[10] = g[15] = c(1.0);
    return MetricField::from_expressions(use, g, {1, 3});
  }
  if (name == "polar2") {
    const Expr r = sym("r");
    return MetricField::from_expressions(use, {c(1.0), c(0.0), c(0.0), pow(r, 2.0)}, {0, 2});
  }
  if (name == "spherical3") {
    const Expr r = sym("r"), th = sym("theta");
    std::vector<Expr> g(9, c(0.0));
    g[0] = c(1.0);
    g[4] = pow(r, 2.0);
    g[8] = pow(r, 2.0) * pow(apply(Function::Sin, th), 2.0);
    return MetricField::from_expressions(use, g, {0, 3});
  }
  if (name == "static_spherical" || name == "schwarzschild") {
    const Expr r = sym("r"), th = sym("theta");
    std::vector<Expr> g(16, c(0.0));
    if (name == "static_spherical") {
      auto get = [&](const char* key) {
        auto it = params.values.find(key);
        return parse(it == params.values.end() ? "1" : it->second, symbols);
      };
      g[0] = -pow(get("alpha"), 2.0);
      g[5] = pow(get("a"), 2.0);
    } else {
      const double m = preset_mass(params);
      const Expr f = c(1.0) - c(2.0 * m) / r;
      g[0] = -f;
      g[5] = pow(f, -1.0);
    }
    g[10] = pow(r, 2.0);
    g[15] = pow(r, 2.0) * pow(apply(Function::Sin, th), 2.0);
    return MetricField::from_expressions(use, g, {1, 3});
  }
  throw PreconditionError("unknown metric preset '" + std::string(name) + "'");
}

}  // namespace covar
