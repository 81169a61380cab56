#include "covar/grid.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "covar/error.hpp"

namespace covar {

namespace {

std::string lattice_index_string(const GridSpec& grid, std::size_t node) {
  const auto idx = grid.unflatten(node);
  std::ostringstream os;
  os << "[";
  for (int a = 0; a < grid.dim(); ++a) os << (a ? ", " : "") << idx[a];
  os << "]";
  return os.str();
}

}  // namespace

CoordinateChart::CoordinateChart(std::vector<std::string> names, std::vector<double> lower,
                                 std::vector<double> upper, std::vector<bool> periodic,
                                 std::vector<std::vector<double>> singular)
    : names_(std::move(names)),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      periodic_(std::move(periodic)),
      singular_(std::move(singular)) {
  const std::size_t n = names_.size();
  if (periodic_.empty()) periodic_.assign(n, false);
  if (singular_.empty()) singular_.assign(n, {});
  if (n < 2 || n > static_cast<std::size_t>(kMaxDim))
    throw GeometryError("chart dimension must be between 2 and 4, got " + std::to_string(n));
  if (lower_.size() != n || upper_.size() != n || periodic_.size() != n || singular_.size() != n)
    throw GeometryError("chart axis lists have inconsistent lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (names_[i].empty()) throw GeometryError("empty coordinate name");
    for (std::size_t j = 0; j < i; ++j)
      if (names_[i] == names_[j]) throw GeometryError("duplicate coordinate '" + names_[i] + "'");
    if (!(lower_[i] < upper_[i]))
      throw GeometryError("axis '" + names_[i] + "' needs lower < upper");
    if (periodic_[i]) continue;
    for (double s : singular_[i])
      if (s >= lower_[i] && s <= upper_[i]) {
        std::ostringstream os;
        os << "axis '" << names_[i] << "' bounds [" << lower_[i] << ", " << upper_[i]
           << "] include the singular point " << s;
        throw GeometryError(os.str());
      }
  }
}

int CoordinateChart::axis_of(std::string_view name) const {
  for (int i = 0; i < dim(); ++i)
    if (names_[i] == name) return i;
  return -1;
}

SymbolTable CoordinateChart::symbols() const { return SymbolTable{names_, {}}; }

bool CoordinateChart::contains(std::span<const double> point) const {
  if (point.size() < names_.size()) return false;
  for (int i = 0; i < dim(); ++i)
    if (point[i] < lower_[i] || point[i] > upper_[i]) return false;
  return true;
}

CoordinateChart CoordinateChart::with_bounds(std::vector<double> lower,
                                             std::vector<double> upper) const {
  return CoordinateChart(names_, std::move(lower), std::move(upper), periodic_, singular_);
}

// ---- GridSpec -------------------------------------------------------------------

GridSpec::GridSpec(CoordinateChart chart, std::vector<int> points, int order)
    : chart_(std::move(chart)), points_(std::move(points)), order_(order) {
  const int d = chart_.dim();
  if (static_cast<int>(points_.size()) != d)
    throw PreconditionError("grid needs one point count per axis");
  if (order_ != 2 && order_ != 4 && order_ != 6)
    throw PreconditionError("stencil order must be 2, 4 or 6, got " + std::to_string(order_));
  spacing_.resize(d);
  stride_.resize(d);
  size_ = 1;
  for (int a = d - 1; a >= 0; --a) {
    const int n = points_[a];
    if (n < kMinPoints || n < order_ + 1)
      throw PreconditionError("axis '" + chart_.name(a) + "' has " + std::to_string(n) +
                              " points; stencil order " + std::to_string(order_) + " needs at least " +
                              std::to_string(std::max(kMinPoints, order_ + 1)));
    const double span = chart_.upper(a) - chart_.lower(a);
    spacing_[a] = chart_.periodic(a) ? span / n : span / (n - 1);
    stride_[a] = size_;
    size_ *= static_cast<std::size_t>(n);
  }
}

double GridSpec::coordinate(int axis, int i) const {
  if (!chart_.periodic(axis) && i == points_[axis] - 1) return chart_.upper(axis);
  return chart_.lower(axis) + i * spacing_[axis];
}

std::array<int, kMaxDim> GridSpec::unflatten(std::size_t node) const {
  std::array<int, kMaxDim> idx{};
  for (int a = 0; a < dim(); ++a) idx[a] = static_cast<int>((node / stride_[a]) % points_[a]);
  return idx;
}

std::size_t GridSpec::flatten(std::span<const int> index) const {
  std::size_t n = 0;
  for (int a = 0; a < dim(); ++a) n += static_cast<std::size_t>(index[a]) * stride_[a];
  return n;
}

std::array<double, kMaxDim> GridSpec::coordinates(std::size_t node) const {
  const auto idx = unflatten(node);
  std::array<double, kMaxDim> x{};
  for (int a = 0; a < dim(); ++a) x[a] = coordinate(a, idx[a]);
  return x;
}

GridSpec GridSpec::with_order(int order) const { return GridSpec(chart_, points_, order); }

// ---- SampledField -----------------------------------------------------------------

int component_count(int dim, int rank) {
  int c = 1;
  for (int i = 0; i < rank; ++i) c *= dim;
  return c;
}

SampledField::SampledField(GridSpec grid, int rank, std::vector<double> values)
    : grid_(std::move(grid)),
      rank_(rank),
      components_(component_count(grid_.dim(), rank)),
      values_(std::move(values)) {
  if (rank_ < 0) throw PreconditionError("negative field rank");
  if (values_.size() != grid_.size() * components_)
    throw PreconditionError("sampled field has " + std::to_string(values_.size()) +
                            " values, expected " + std::to_string(grid_.size() * components_));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw DomainError("non-finite sample at lattice index " +
                        lattice_index_string(grid_, i / components_) + ", component " +
                        std::to_string(i % components_));
}

// ---- finite differences ---------------------------------------------------------------

// Fornberg's recursion, restricted to the first derivative at x = 0.
std::vector<double> first_derivative_weights(std::span<const int> offsets) {
  const int n = static_cast<int>(offsets.size());
  // c[j][k]: weight of node j for derivative k (k = 0, 1).
  std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
  c[0][0] = 1.0;
  double c1 = 1.0;
  double c4 = offsets[0];
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = static_cast<double>(offsets[i] - offsets[j]);
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) w[j] = c[j][1];
  return w;
}

DifferenceOperator::DifferenceOperator(const GridSpec& grid) : grid_(grid) {
  const int order = grid_.order();
  const int half = order / 2;
  const int width = order + 1;
  std::vector<int> central(width);
  for (int k = 0; k < width; ++k) central[k] = k - half;
  const Stencil central_stencil{central, first_derivative_weights(central)};

  stencils_.resize(grid_.dim());
  for (int a = 0; a < grid_.dim(); ++a) {
    const int n = grid_.points(a);
    const bool periodic = grid_.chart().periodic(a);
    auto& line = stencils_[a];
    line.resize(n);
    // Interior nodes share the central stencil; the first and last order/2 nodes
    // of a non-periodic axis get one-sided stencils of the same width.
    for (int i = 0; i < n; ++i) {
      if (periodic || (i >= half && i < n - half)) {
        line[i] = central_stencil;
        continue;
      }
      const int start = i < half ? -i : (n - 1 - i) - (width - 1);
      std::vector<int> offs(width);
      for (int k = 0; k < width; ++k) offs[k] = start + k;
      line[i] = Stencil{offs, first_derivative_weights(offs)};
    }
  }
}

void DifferenceOperator::apply(const SampledField& f, std::size_t node, int axis,
                               std::span<double> out) const {
  if (axis < 0 || axis >= grid_.dim())
    throw PreconditionError("derivative axis " + std::to_string(axis) + " out of range");
  const int n = grid_.points(axis);
  const bool periodic = grid_.chart().periodic(axis);
  const std::size_t stride = grid_.stride(axis);
  const int i = static_cast<int>((node / stride) % n);
  const std::size_t line_base = node - static_cast<std::size_t>(i) * stride;
  const Stencil& s = stencils_[axis][i];
  const double inv_h = 1.0 / grid_.spacing(axis);
  const int comps = f.components();
  const auto in = f.values();
  for (int c = 0; c < comps; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.offsets.size(); ++k) {
      int j = i + s.offsets[k];
      if (periodic) j = ((j % n) + n) % n;
      acc += s.weights[k] * in[(line_base + static_cast<std::size_t>(j) * stride) * comps + c];
    }
    out[c] = acc * inv_h;
  }
}

SampledField partial_derivative(const SampledField& f, int axis) {
  const GridSpec& grid = f.grid();
  if (axis < 0 || axis >= grid.dim())
    throw PreconditionError("derivative axis " + std::to_string(axis) + " out of range");
  const DifferenceOperator op(grid);
  const int comps = f.components();
  std::vector<double> out(f.values().size());
  for (std::size_t node = 0; node < grid.size(); ++node)
    op.apply(f, node, axis, std::span<double>(out.data() + node * comps, comps));
  return SampledField(grid, f.rank(), std::move(out));
}

SampledField sample(const std::vector<Expr>& components, int rank, const GridSpec& grid) {
  const int comps = component_count(grid.dim(), rank);
  if (static_cast<int>(components.size()) != comps)
    throw PreconditionError("expected " + std::to_string(comps) + " component expressions");
  return sample(
      [&](std::span<const double> x, std::span<double> out) {
        for (int c = 0; c < comps; ++c) out[c] = components[c].eval(x);
      },
      rank, grid);
}

SampledField sample(const std::function<void(std::span<const double>, std::span<double>)>& f,
                    int rank, const GridSpec& grid) {
  const int comps = component_count(grid.dim(), rank);
  std::vector<double> values(grid.size() * comps);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto x = grid.coordinates(node);
    std::span<double> out(values.data() + node * comps, comps);
    try {
      f(std::span<const double>(x.data(), grid.dim()), out);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (lattice index " +
                        lattice_index_string(grid, node) + ")");
    }
  }
  return SampledField(grid, rank, std::move(values));
}

std::vector<std::array<double, kMaxDim>> random_points(const CoordinateChart& chart, int count,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::array<double, kMaxDim>> pts(count);
  for (auto& p : pts)
    for (int a = 0; a < chart.dim(); ++a)
      p[a] = std::uniform_real_distribution<double>(chart.lower(a), chart.upper(a))(rng);
  return pts;
}

}  // namespace covar
