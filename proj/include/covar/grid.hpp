#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covar/expr.hpp"
#include "covar/jet.hpp"

namespace covar {

/// Named coordinates with per-axis bounds. Axes may be periodic; non-periodic
/// axes may declare singular coordinate values that the bounds must exclude.
class CoordinateChart {
 public:
  CoordinateChart(std::vector<std::string> names, std::vector<double> lower,
                  std::vector<double> upper, std::vector<bool> periodic = {},
                  std::vector<std::vector<double>> singular = {});

  int dim() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int axis) const { return names_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  bool periodic(int axis) const { return periodic_[axis]; }
  const std::vector<double>& singular(int axis) const { return singular_[axis]; }

  /// Index of `name`, or -1.
  int axis_of(std::string_view name) const;
  SymbolTable symbols() const;
  bool contains(std::span<const double> point) const;

  /// Same coordinate names in the same order (bounds may differ).
  bool same_coordinates(const CoordinateChart& other) const { return names_ == other.names_; }
  /// Copy with new bounds on the same coordinates.
  CoordinateChart with_bounds(std::vector<double> lower, std::vector<double> upper) const;

  bool operator==(const CoordinateChart&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> lower_, upper_;
  std::vector<bool> periodic_;
  std::vector<std::vector<double>> singular_;
};

/// Uniform lattice over a chart. Non-periodic axes include both end points;
/// periodic axes place n points on [lower, upper).
class GridSpec {
 public:
  static constexpr int kMinPoints = 5;

  GridSpec(CoordinateChart chart, std::vector<int> points, int order = 4);

  const CoordinateChart& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }
  int points(int axis) const { return points_[axis]; }
  const std::vector<int>& points() const { return points_; }
  /// Finite-difference order (2, 4 or 6).
  int order() const { return order_; }
  double spacing(int axis) const { return spacing_[axis]; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  double coordinate(int axis, int i) const;
  std::array<int, kMaxDim> unflatten(std::size_t node) const;
  std::size_t flatten(std::span<const int> index) const;
  /// Coordinates of `node`; only the first dim() entries are meaningful.
  std::array<double, kMaxDim> coordinates(std::size_t node) const;

  /// Same lattice with another stencil order.
  GridSpec with_order(int order) const;

  bool operator==(const GridSpec& o) const {
    return chart_ == o.chart_ && points_ == o.points_ && order_ == o.order_;
  }

 private:
  CoordinateChart chart_;
  std::vector<int> points_;
  int order_;
  std::vector<double> spacing_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

/// Real-valued samples of a rank-`rank` array of components on every lattice node.
/// Layout: values[node * components + component]; component index is row-major
/// over the rank slots, each of extent dim.
class SampledField {
 public:
  SampledField(GridSpec grid, int rank, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  int rank() const { return rank_; }
  int components() const { return components_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> node(std::size_t n) const {
    return std::span<const double>(values_).subspan(n * components_, components_);
  }
  double at(std::size_t n, int component) const { return values_[n * components_ + component]; }

 private:
  GridSpec grid_;
  int rank_;
  int components_;
  std::vector<double> values_;
};

int component_count(int dim, int rank);

/// Finite-difference weights for the first derivative at offset 0 using the
/// given integer node offsets (unit spacing).
std::vector<double> first_derivative_weights(std::span<const int> offsets);

/// First-derivative stencils for every axis of a lattice. apply() evaluates the
/// derivative at a single node with the same arithmetic as partial_derivative().
class DifferenceOperator {
 public:
  explicit DifferenceOperator(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  /// d f / d x^axis at `node`, all components written to `out`.
  void apply(const SampledField& f, std::size_t node, int axis, std::span<double> out) const;

 private:
  struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;
  };
  GridSpec grid_;
  std::vector<std::vector<Stencil>> stencils_;  // [axis][position along axis]
};

/// Derivative along `axis`: central stencil of the grid's order in the interior,
/// one-sided stencils of the same order next to non-periodic boundaries,
/// wrap-around on periodic axes.
SampledField partial_derivative(const SampledField& f, int axis);

/// Pointwise evaluation of `components` (count dim^rank) on every lattice node.
/// Throws if any value is non-finite, naming the lattice index.
SampledField sample(const std::vector<Expr>& components, int rank, const GridSpec& grid);
SampledField sample(const std::function<void(std::span<const double>, std::span<double>)>& f,
                    int rank, const GridSpec& grid);

/// `count` points drawn uniformly from the chart's coordinate box (seeded, reproducible).
std::vector<std::array<double, kMaxDim>> random_points(const CoordinateChart& chart, int count,
                                                       std::uint64_t seed);

}  // namespace covar
