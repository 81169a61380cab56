#include "covar/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covar/error.hpp"

namespace covar {

std::string_view quadrature_name(Quadrature q) {
  return q == Quadrature::Simpson ? "simpson" : "trapezoid";
}

int quadrature_order(Quadrature q) { return q == Quadrature::Simpson ? 4 : 2; }

std::vector<double> quadrature_weights(Quadrature q, int count, double h, bool periodic) {
  if (count < 1) throw PreconditionError("quadrature needs at least one node");
  if (periodic) return std::vector<double>(count, h);
  if (count == 1) return {1.0};
  std::vector<double> w(count, 0.0);
  auto trapezoid = [&] {
    std::fill(w.begin(), w.end(), h);
    w.front() = w.back() = 0.5 * h;
  };
  auto simpson = [&](int first, int intervals) {
    for (int i = 0; i < intervals; i += 2) {
      w[first + i] += h / 3.0;
      w[first + i + 1] += 4.0 * h / 3.0;
      w[first + i + 2] += h / 3.0;
    }
  };
  auto three_eighths = [&](int first) {
    const double c[4] = {1.0, 3.0, 3.0, 1.0};
    for (int k = 0; k < 4; ++k) w[first + k] += 3.0 * h / 8.0 * c[k];
  };
  const int intervals = count - 1;
  if (q == Quadrature::Trapezoid || count == 2) {
    trapezoid();
  } else if (intervals % 2 == 0) {
    simpson(0, intervals);
  } else {
    simpson(0, intervals - 3);
    three_eighths(intervals - 3);
  }
  return w;
}

// ---- RegionSpec ---------------------------------------------------------------

RegionSpec::RegionSpec(GridSpec grid) : grid_(std::move(grid)) {
  for (int a = 0; a < grid_.dim(); ++a) {
    first_.push_back(0);
    last_.push_back(grid_.points(a) - 1);
  }
  build_faces();
}

RegionSpec::RegionSpec(GridSpec grid, std::vector<double> lower, std::vector<double> upper)
    : grid_(std::move(grid)) {
  const int d = grid_.dim();
  if (static_cast<int>(lower.size()) != d || static_cast<int>(upper.size()) != d)
    throw PreconditionError("region needs one interval per axis");
  const auto& chart = grid_.chart();
  auto near = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  for (int a = 0; a < d; ++a) {
    const std::string& name = chart.name(a);
    if (lower[a] > upper[a])
      throw PreconditionError("region axis '" + name + "' has lower > upper");
    if (chart.periodic(a)) {
      if (!near(lower[a], chart.lower(a)) || !near(upper[a], chart.upper(a)))
        throw PreconditionError("region must cover the full period of axis '" + name + "'");
      first_.push_back(0);
      last_.push_back(grid_.points(a) - 1);
      continue;
    }
    auto snap = [&](double x) {
      const int i = static_cast<int>(std::lround((x - chart.lower(a)) / grid_.spacing(a)));
      if (i < 0 || i >= grid_.points(a) || !near(grid_.coordinate(a, i), x)) {
        std::ostringstream os;
        os << "region bound " << x << " on axis '" << name
           << "' is outside the grid or not on a lattice plane";
        throw PreconditionError(os.str());
      }
      return i;
    };
    first_.push_back(snap(lower[a]));
    last_.push_back(snap(upper[a]));
  }
  build_faces();
}

void RegionSpec::build_faces() {
  faces_.clear();
  for (int a = 0; a < dim(); ++a) {
    if (grid_.chart().periodic(a) || collapsed(a)) continue;
    faces_.push_back(Face{a, -1, 1});
    faces_.push_back(Face{a, +1, 1});
  }
}

RegionSpec RegionSpec::reversed() const {
  RegionSpec r = *this;
  for (auto& f : r.faces_) f.orientation = -f.orientation;
  return r;
}

std::vector<std::size_t> RegionSpec::nodes() const {
  std::vector<std::size_t> out;
  std::array<int, kMaxDim> idx{};
  for (int a = 0; a < dim(); ++a) idx[a] = first_[a];
  while (true) {
    out.push_back(grid_.flatten(std::span<const int>(idx.data(), dim())));
    int a = dim() - 1;
    while (a >= 0 && idx[a] == last_[a]) {
      idx[a] = first_[a];
      --a;
    }
    if (a < 0) break;
    ++idx[a];
  }
  return out;
}

// ---- evaluation helpers ------------------------------------------------------------

namespace {

void require_on_grid(const TensorDensityField& f, const RegionSpec& region) {
  if (!f.chart().same_coordinates(region.grid().chart()))
    throw PreconditionError("field chart does not match the region's grid");
  if (!f.is_analytic() && !(f.samples().grid() == region.grid()))
    throw PreconditionError("sampled field lives on a different grid than the region");
}

class MetricAtNodes {
 public:
  MetricAtNodes(const MetricField& m, const GridSpec& grid) : m_(m), grid_(grid) {
    if (!m.chart().same_coordinates(grid.chart()))
      throw PreconditionError("metric chart does not match the region's grid");
    if (!m.is_analytic() && !(*m.grid() == grid))
      throw PreconditionError("sampled metric lives on a different grid than the region");
  }
  MetricPointData operator()(std::size_t node) const {
    if (!m_.is_analytic()) return m_.at_node(node);
    const auto x = grid_.coordinates(node);
    return m_.at(std::span<const double>(x.data(), grid_.dim()));
  }

 private:
  const MetricField& m_;
  const GridSpec& grid_;
};

/// Product weights over the non-collapsed axes, skipping `skip_axis`.
class NodeWeights {
 public:
  NodeWeights(const RegionSpec& r, Quadrature q, int skip_axis = -1) : r_(r) {
    const auto& g = r.grid();
    per_axis_.resize(r.dim());
    for (int a = 0; a < r.dim(); ++a)
      if (a != skip_axis && !r.collapsed(a))
        per_axis_[a] = quadrature_weights(q, r.count(a), g.spacing(a), g.chart().periodic(a));
  }
  double operator()(std::size_t node) const {
    const auto idx = r_.grid().unflatten(node);
    double w = 1.0;
    for (int a = 0; a < r_.dim(); ++a)
      if (!per_axis_[a].empty()) w *= per_axis_[a][idx[a] - r_.first(a)];
    return w;
  }

 private:
  const RegionSpec& r_;
  std::vector<std::vector<double>> per_axis_;  // empty: axis not integrated
};

}  // namespace

SurfaceElement surface_element(const MetricPointData& md, int axis, int sign) {
  SurfaceElement s;
  s.axis = axis;
  s.sign = sign;
  const double gmm = md.ginv[axis][axis];
  if (gmm == 0.0)
    throw GeometryError("coordinate face normal to axis " + std::to_string(axis) + " is null");
  const double root = std::sqrt(std::abs(gmm));
  s.normal[axis] = sign / root;
  s.causal = gmm > 0.0 ? 1 : -1;
  s.induced_density = md.sqrt_det * root;
  return s;
}

double volume_integral(const TensorDensityField& f, const MetricField& m, const RegionSpec& region,
                       Quadrature q) {
  if (f.rank() != 0) throw PreconditionError("volume_integral needs a scalar integrand");
  if (f.weight() != 0.0 && f.weight() != 1.0)
    throw PreconditionError("volume_integral integrand must have weight 0 or 1");
  require_on_grid(f, region);
  const MetricAtNodes metric(m, region.grid());
  const NodeWeights weights(region, q);
  const bool density = f.weight() == 1.0;
  double sum = 0.0, v = 0.0;
  for (std::size_t node : region.nodes()) {
    f.values_at_node(region.grid(), node, std::span<double>(&v, 1));
    sum += weights(node) * (density ? v : v * metric(node).sqrt_det);
  }
  return sum;
}

double face_flux(const TensorDensityField& p, const MetricField& m, const RegionSpec& region,
                 const Face& face, Quadrature q) {
  if (p.signature() != IndexSignature{Slot::Up} || p.weight() != 0.0)
    throw PreconditionError("flux needs a weight-0 vector; higher-rank tensors have no Gauss law");
  require_on_grid(p, region);
  const int axis = face.axis;
  if (axis < 0 || axis >= region.dim() || region.collapsed(axis) ||
      region.grid().chart().periodic(axis))
    throw PreconditionError("face axis is not a bounding axis of the region");
  const MetricAtNodes metric(m, region.grid());
  const NodeWeights weights(region, q, axis);
  const int plane = face.side < 0 ? region.first(axis) : region.last(axis);
  const int d = region.dim();
  std::vector<double> v(d);
  double sum = 0.0;
  for (std::size_t node : region.nodes()) {
    if (region.grid().unflatten(node)[axis] != plane) continue;
    p.values_at_node(region.grid(), node, v);
    const auto se = surface_element(metric(node), axis, face.side);
    double contraction = 0.0;
    for (int nu = 0; nu < d; ++nu) contraction += v[nu] * se.normal[nu];
    sum += weights(node) * contraction * se.induced_density;
  }
  return face.orientation * sum;
}

double surface_integral(const TensorDensityField& p, const MetricField& m,
                        const RegionSpec& region, Quadrature q) {
  double sum = 0.0;
  for (const Face& f : region.faces()) sum += face_flux(p, m, region, f, q);
  return sum;
}

GaussReport gauss_check(const TensorDensityField& p, const MetricField& m, const RegionSpec& region,
                        Quadrature q) {
  const auto div = divergence_vector(p, m, DivergenceRoute::SqrtG);
  GaussReport r;
  r.lhs = volume_integral(div, m, region, q);
  r.rhs = surface_integral(p, m, region, q);
  r.residual = std::abs(r.lhs - r.rhs) / std::max({std::abs(r.lhs), std::abs(r.rhs), 1.0});
  for (int a = 0; a < region.dim(); ++a)
    if (!region.collapsed(a)) r.resolution = std::max(r.resolution, region.count(a));
  r.channel = div.channel();
  r.order = r.channel == Channel::FiniteDifference
                ? std::min(region.grid().order(), quadrature_order(q))
                : quadrature_order(q);
  return r;
}

MassReport mass_integral(const StressEnergyField& t, const TensorDensityField& k,
                         const MetricField& m, const RegionSpec& region,
                         const MassOptions& options) {
  MassReport r;
  for (int a = 0; a < region.dim(); ++a) {
    if (!region.collapsed(a)) continue;
    if (r.slice_axis >= 0)
      throw PreconditionError("mass integral needs a region with exactly one collapsed axis");
    r.slice_axis = a;
  }
  if (r.slice_axis < 0)
    throw PreconditionError("mass integral needs a slice: collapse one axis of the region");
  if (m.signature().negative != 1)
    throw GeometryError("mass integral needs exactly one timelike direction");
  const int tau = r.slice_axis;
  const int d = region.dim();
  require_on_grid(k, region);

  const bool analytic = k.is_analytic() && m.is_analytic();
  const GridSpec probe = analytic ? GridSpec(m.chart(), std::vector<int>(d, 7), 2) : region.grid();
  r.killing_residual = killing_residual(k, m, probe).max_norm;
  if (r.killing_residual > options.killing_hard_cap) {
    std::ostringstream os;
    os << "k is far from a Killing vector (residual " << r.killing_residual << " > cap "
       << options.killing_hard_cap << ")";
    throw PreconditionError(os.str());
  }
  if (r.killing_residual > options.killing_tolerance) {
    std::ostringstream os;
    os << "Killing residual " << r.killing_residual << " exceeds " << options.killing_tolerance;
    r.warnings.push_back(os.str());
  }

  const auto mixed = t.mixed(m);
  const auto trace = t.trace(m);
  require_on_grid(mixed, region);
  const MetricAtNodes metric(m, region.grid());
  const NodeWeights weights(region, options.quadrature);
  std::vector<double> tm(d * d), kv(d);
  double tr = 0.0, sum = 0.0;
  for (std::size_t node : region.nodes()) {
    const auto se = surface_element(metric(node), tau, +1);
    if (se.causal >= 0)
      throw GeometryError("slice normal to axis '" + region.grid().chart().name(tau) +
                          "' is not spacelike: no timelike direction");
    mixed.values_at_node(region.grid(), node, tm);
    trace.values_at_node(region.grid(), node, std::span<double>(&tr, 1));
    k.values_at_node(region.grid(), node, kv);
    double integrand = 0.0;
    for (int nu = 0; nu < d; ++nu) {
      const double comb = tm[tau * d + nu] - (nu == tau ? options.trace_coefficient * tr : 0.0);
      integrand += comb * kv[nu];
    }
    sum += weights(node) * integrand * se.normal[tau] * se.induced_density;
  }
  r.mass = options.prefactor * sum;
  return r;
}

}  // namespace covar
