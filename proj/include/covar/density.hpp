#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "covar/expr.hpp"
#include "covar/grid.hpp"
#include "covar/metric.hpp"
#include "covar/tensor_field.hpp"

namespace covar {

/// Invertible coordinate change x -> x'. `forward` gives x'^mu in source symbols,
/// `inverse` gives x^mu in target symbols; both Jacobians are symbolic.
class ChartMap {
 public:
  static constexpr double kRoundTripTolerance = 1e-10;

  /// Validates forward(inverse(x')) == x' and inverse(forward(x)) == x at
  /// `check_points` seeded random points of each chart, and a nonzero Jacobian.
  ChartMap(CoordinateChart source, CoordinateChart target, std::vector<Expr> forward,
           std::vector<Expr> inverse, int check_points = 100, std::uint64_t seed = 7);

  const CoordinateChart& source() const { return source_; }
  const CoordinateChart& target() const { return target_; }
  const std::vector<Expr>& forward() const { return forward_; }
  const std::vector<Expr>& inverse() const { return inverse_; }

  std::array<double, kMaxDim> to_target(std::span<const double> x) const;
  std::array<double, kMaxDim> to_source(std::span<const double> xp) const;
  /// d x'^mu / d x^a at a source point, as [mu][a].
  Matrix forward_jacobian(std::span<const double> x) const;
  /// d x^a / d x'^mu at a target point, as [a][mu].
  Matrix inverse_jacobian(std::span<const double> xp) const;

  /// d x^a / d x'^mu as expressions in target symbols, [a * dim + mu].
  const std::vector<Expr>& inverse_jacobian_exprs() const { return inverse_jac_; }
  /// d x'^mu / d x^a rewritten in target symbols, [mu * dim + a].
  const std::vector<Expr>& forward_jacobian_on_target() const { return forward_jac_target_; }

  /// Largest round-trip error seen during validation.
  double round_trip_error() const { return round_trip_error_; }

 private:
  CoordinateChart source_, target_;
  std::vector<Expr> forward_, inverse_;
  std::vector<Expr> forward_jac_, inverse_jac_, forward_jac_target_;
  double round_trip_error_ = 0.0;
};

/// The map `second` after `first` (first.target must match second.source).
ChartMap compose(const ChartMap& first, const ChartMap& second);

/// Components on the target chart:
/// T'^{mu..}_{nu..} = |dx/dx'|^w (dx'^mu/dx^a)..(dx^b/dx'^nu).. T^{a..}_{b..}.
/// Expression-backed input gives expression-backed output; sampled input is rejected.
TensorDensityField transform_density(const TensorDensityField& t, const ChartMap& map);

/// The metric pulled back to the target chart (same signature).
MetricField transform_metric(const MetricField& m, const ChartMap& map);

struct DeterminantReport {
  /// max |g' - |dx/dx'|^2 g| / |dx/dx'|^2 g over the checked points
  double max_relative_deviation = 0.0;
  int points = 0;
};

/// Compares det g' of the transformed metric with |dx/dx'|^2 det g at
/// `points` seeded random points of the target chart.
DeterminantReport determinant_weight_check(const MetricField& m, const ChartMap& map,
                                           int points = 100, std::uint64_t seed = 11);

/// (sqrt g)^{-w} t as a weight-0 field.
TensorDensityField normalize_weight(const TensorDensityField& t, const MetricField& m);
/// (sqrt g)^{w} t for a weight-0 field t, giving weight w.
TensorDensityField restore_weight(const TensorDensityField& t, const MetricField& m, double weight);

}  // namespace covar
