#pragma once

#include <array>
#include <span>

#include "covar/metric.hpp"
#include "covar/tensor_field.hpp"

namespace covar {

/// Gamma^mu_{alpha beta} at one point. Storage is symmetric in the lower pair,
/// so gamma(mu, a, b) == gamma(mu, b, a) holds by construction.
class ChristoffelSymbols {
 public:
  explicit ChristoffelSymbols(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  double operator()(int mu, int a, int b) const { return data_[mu][pair(a, b)]; }
  double& at(int mu, int a, int b) { return data_[mu][pair(a, b)]; }
  /// Gamma^nu_{lambda nu}.
  double trace(int lambda) const;

 private:
  static int pair(int a, int b) {
    if (a > b) std::swap(a, b);
    return a * kMaxDim - a * (a - 1) / 2 + (b - a);
  }
  int dim_;
  std::array<std::array<double, kMaxDim*(kMaxDim + 1) / 2>, kMaxDim> data_{};
};

/// 1/2 g^{mu sigma} (g_{sigma a,b} + g_{sigma b,a} - g_{ab,sigma}).
ChristoffelSymbols christoffel_symbols(const MetricPointData& md);

/// Connection coefficients of a metric, evaluated on demand.
class ChristoffelField {
 public:
  explicit ChristoffelField(MetricField metric) : metric_(std::move(metric)) {}

  const MetricField& metric() const { return metric_; }
  Channel channel() const { return metric_.channel(); }
  /// Analytic metrics: any chart point.
  ChristoffelSymbols at(std::span<const double> x) const {
    return christoffel_symbols(metric_.at(x));
  }
  /// Sampled metrics: lattice node of metric().grid().
  ChristoffelSymbols at_node(std::size_t node) const {
    return christoffel_symbols(metric_.at_node(node));
  }
  /// Gamma^mu_{ab} as an up-down-down component array (not a tensor).
  TensorDensityField components() const;

 private:
  MetricField metric_;
};

ChristoffelField christoffel(const MetricField& m);

/// Two independent routes to the same covector.
struct ChristoffelTrace {
  /// (sqrt g)_{,lambda} / sqrt g, from the determinant's own derivative.
  TensorDensityField log_sqrt_g_gradient;
  /// Gamma^nu_{lambda nu}, contracted from the full symbols.
  TensorDensityField contracted;
};
ChristoffelTrace christoffel_trace(const MetricField& m);

/// Partial derivatives of every component; appends one down slot, keeps the weight.
/// For a weight-0 scalar this is the gradient covector.
TensorDensityField partial_gradient(const TensorDensityField& t);

/// Covariant derivative of a tensor density of any rank and weight; the new
/// down index is appended last. Includes the -w (sqrt g)_{,rho}/sqrt g term.
TensorDensityField covariant_derivative(const TensorDensityField& t, const MetricField& m);

enum class DivergenceRoute { Christoffel, SqrtG };

/// P^nu_{;nu} of a weight-0 vector, either as P^nu_{,nu} + P^lambda Gamma^nu_{lambda nu}
/// or as (sqrt g P^nu)_{,nu} / sqrt g.
TensorDensityField divergence_vector(const TensorDensityField& p, const MetricField& m,
                                     DivergenceRoute route);

struct AntisymmetricDivergence {
  /// (sqrt g F^{ab})_{,b} / sqrt g
  TensorDensityField divergence;
  /// F^{ab}_{;b} with every connection term kept.
  TensorDensityField full;
  /// Gamma^a_{mb} F^{mb}, zero for antisymmetric F.
  TensorDensityField vanishing_term;
  /// Largest |F^{ab} + F^{ba}| / 2 seen by the precondition check.
  double max_symmetric_part = 0.0;
};

inline constexpr double kAntisymmetryThreshold = 1e-12;

/// Divergence of an antisymmetric up-up field. The precondition is checked on the
/// sampled lattice of F, or on `check_sites` (default: 7 points per axis).
AntisymmetricDivergence divergence_antisymmetric(const TensorDensityField& f,
                                                 const MetricField& m,
                                                 const GridSpec* check_sites = nullptr);

/// k^c g_{ab,c} + g_{ac} k^c_{,b} + g_{bc} k^c_{,a}.
TensorDensityField lie_derivative_metric(const TensorDensityField& k, const MetricField& m);

/// Error allowance tol = max(floor, C h^order) for identities that hold exactly
/// in the continuum.
struct Tolerance {
  double floor = 1e-10;
  double constant = 0.0;
  int order = 0;

  double at(double h) const;
  /// Fits C from errors measured at two spacings, inflated by `safety`.
  static Tolerance calibrate(double err_coarse, double h_coarse, double err_fine, double h_fine,
                             int order, double floor = 1e-10, double safety = 4.0);
};

struct KillingReport {
  /// k_{a;b} + k_{b;a}
  TensorDensityField residual;
  double max_norm = 0.0;
  /// max |residual - Lie derivative of g along k|
  double lie_mismatch = 0.0;
  bool consistent = false;
};

/// Killing residual on the nodes of `sites`, cross-checked against the Lie derivative.
KillingReport killing_residual(const TensorDensityField& k, const MetricField& m,
                               const GridSpec& sites, double consistency_tolerance = 1e-10);

}  // namespace covar
