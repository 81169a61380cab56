#pragma once

#include <string>
#include <vector>

#include "covar/calculus.hpp"
#include "covar/metric.hpp"
#include "covar/tensor_field.hpp"

namespace covar {

/// Symmetric up-up T^{mu nu} of weight 0. Mixed and trace forms are derived on demand.
class StressEnergyField {
 public:
  static constexpr double kSymmetryTolerance = 1e-12;

  /// Checks symmetry on the lattice of a sampled field or at `check_sites`
  /// (default: 7 points per axis) for an analytic one.
  explicit StressEnergyField(TensorDensityField t, const GridSpec* check_sites = nullptr);

  const TensorDensityField& up() const { return t_; }
  /// T^mu_nu = T^{mu a} g_{a nu}
  TensorDensityField mixed(const MetricField& m) const;
  /// T^mu_mu
  TensorDensityField trace(const MetricField& m) const;
  const CoordinateChart& chart() const { return t_.chart(); }

 private:
  TensorDensityField t_;
};

inline constexpr double kScalarFieldScale = 0.07957747154594767;  // 1/(4 pi)

/// scale * (phi^{;a} phi^{;b} - 1/2 g^{ab} phi_{;c} phi^{;c}) with phi^{;a} = g^{ab} phi_{,b}.
StressEnergyField scalar_stress_energy(const TensorDensityField& phi, const MetricField& m,
                                       double scale = kScalarFieldScale);

/// T^{mu nu}_{;nu}
TensorDensityField stress_energy_divergence(const StressEnergyField& t, const MetricField& m);

/// J^nu = k_mu T^{mu nu}, with the two pieces of its divergence:
/// (k_mu T^{mu nu})_{;nu} = k_{mu;nu} T^{mu nu} + k_mu T^{mu nu}_{;nu}.
struct CurrentReport {
  TensorDensityField current;
  TensorDensityField killing_term;
  TensorDensityField conservation_term;
  /// max-norm of k_{a;b} + k_{b;a} on the sites
  double killing_residual = 0.0;
  std::vector<std::string> warnings;
};

/// A non-Killing k is accepted with a warning when its residual exceeds
/// `killing_tolerance` on `sites`.
CurrentReport conserved_current(const TensorDensityField& k, const StressEnergyField& t,
                                const MetricField& m, const GridSpec& sites,
                                double killing_tolerance = 1e-10);

}  // namespace covar
