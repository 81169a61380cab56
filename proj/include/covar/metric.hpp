#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covar/expr.hpp"
#include "covar/grid.hpp"
#include "covar/jet.hpp"

namespace covar {

using Matrix = std::array<std::array<double, kMaxDim>, kMaxDim>;

/// Counts of negative and positive eigenvalues, e.g. {1, 3} for a Lorentzian 4-metric.
struct Signature {
  int negative = 0;
  int positive = 0;
  bool operator==(const Signature&) const = default;
};

enum class Channel { Analytic, FiniteDifference };
std::string_view channel_name(Channel c);

/// Metric quantities at one point. `det` is |det g_{mu nu}|.
struct MetricPointData {
  int dim = 0;
  Matrix g{};
  Matrix ginv{};
  double det = 0.0;
  double sqrt_det = 0.0;
  /// dg[l][m][n] = g_{mn,l}
  std::array<Matrix, kMaxDim> dg{};
  /// dginv[l][m][n] = (g^{mn})_{,l}
  std::array<Matrix, kMaxDim> dginv{};
  /// (sqrt g)_{,l}, differentiated independently of any Christoffel contraction.
  std::array<double, kMaxDim> d_sqrt_det{};

  Jet g_jet(int m, int n) const;
  Jet ginv_jet(int m, int n) const;
  Jet sqrt_det_jet() const;
};

/// Determinant of the leading dim x dim block, by cofactor expansion.
Jet determinant(const std::array<std::array<Jet, kMaxDim>, kMaxDim>& a, int dim);
double determinant(const Matrix& a, int dim);

/// Eigenvalue sign counts of a symmetric matrix.
Signature signature_of(const Matrix& a, int dim);

/// g_{mu nu} over a chart, given either as component expressions (analytic
/// channel: derivatives via symbolic differentiation) or as lattice samples
/// (finite-difference channel). Immutable; copies share state.
class MetricField {
 public:
  static constexpr double kDefaultDetEpsilon = 1e-12;

  /// `components` is row-major dim x dim; only the symmetric part is stored.
  static MetricField from_expressions(CoordinateChart chart, std::vector<Expr> components,
                                      Signature signature,
                                      double det_epsilon = kDefaultDetEpsilon);
  /// `g` must be a rank-2 sampled field.
  static MetricField from_samples(const SampledField& g, Signature signature,
                                  double det_epsilon = kDefaultDetEpsilon);

  bool is_analytic() const;
  Channel channel() const { return is_analytic() ? Channel::Analytic : Channel::FiniteDifference; }
  const CoordinateChart& chart() const;
  int dim() const { return chart().dim(); }
  Signature signature() const;
  double det_epsilon() const;
  /// Lattice of a sampled metric; nullptr for an analytic one.
  const GridSpec* grid() const;
  /// Component expression (analytic metrics only).
  const Expr& component(int m, int n) const;

  /// Analytic metrics: any point. Throws GeometryError on a degenerate metric
  /// or a signature mismatch.
  MetricPointData at(std::span<const double> x) const;
  /// Sampled metrics only: lattice node of grid().
  MetricPointData at_node(std::size_t node) const;

  /// Samples an analytic metric on `grid` (a sampled metric must already live there).
  MetricField sampled_on(const GridSpec& grid) const;
  /// Same components on a chart with the same coordinate names but new bounds.
  MetricField with_chart(CoordinateChart chart) const;

 private:
  struct Impl;
  explicit MetricField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Preset spacetimes. Names: minkowski4, polar2, spherical3, static_spherical,
/// schwarzschild. static_spherical reads expressions "alpha" and "a" (default "1")
/// over (t, r, theta, phi); schwarzschild reads the numeric "M" (default 1).
struct PresetParams {
  std::map<std::string, std::string, std::less<>> values;
};

MetricField preset(std::string_view name, const PresetParams& params = {},
                   std::optional<CoordinateChart> chart = std::nullopt);

/// Default chart used by a preset (bounds away from its coordinate singularities).
CoordinateChart preset_chart(std::string_view name, const PresetParams& params = {});

}  // namespace covar
