#include "covar/physics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covar/error.hpp"

namespace covar {

StressEnergyField::StressEnergyField(TensorDensityField t, const GridSpec* check_sites)
    : t_(std::move(t)) {
  if (t_.signature() != IndexSignature{Slot::Up, Slot::Up} || t_.weight() != 0.0)
    throw PreconditionError("stress-energy must be a weight-0 up-up field, got " +
                            signature_string(t_.signature()));
  const int d = t_.dim();
  const GridSpec probe = !t_.is_analytic() ? t_.samples().grid()
                         : check_sites     ? *check_sites
                                           : GridSpec(t_.chart(), std::vector<int>(d, 7), 2);
  std::vector<double> v(t_.components());
  double worst = 0.0, scale = 1.0;
  for (std::size_t node = 0; node < probe.size(); ++node) {
    t_.values_at_node(probe, node, v);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        worst = std::max(worst, std::abs(v[a * d + b] - v[b * d + a]));
        scale = std::max(scale, std::abs(v[a * d + b]));
      }
  }
  if (worst > kSymmetryTolerance * scale)
    throw PreconditionError("stress-energy is not symmetric: max |T^{ab} - T^{ba}| = " +
                            std::to_string(worst));
}

TensorDensityField StressEnergyField::mixed(const MetricField& m) const {
  return lower_index(t_, m, 1);
}

TensorDensityField StressEnergyField::trace(const MetricField& m) const {
  return contract(mixed(m), 0, 1);
}

StressEnergyField scalar_stress_energy(const TensorDensityField& phi, const MetricField& m,
                                       double scale) {
  if (phi.rank() != 0 || phi.weight() != 0.0)
    throw PreconditionError("scalar_stress_energy needs a weight-0 scalar");
  if (!phi.chart().same_coordinates(m.chart()))
    throw PreconditionError("scalar field chart does not match the metric chart");
  const int d = phi.dim();
  const auto grad = partial_gradient(phi);
  auto t = apply_pointwise(
      &m, {grad}, KernelSpec{{Slot::Up, Slot::Up}, 0.0, false, true},
      [d, scale](const MetricPointData* md, auto in, std::span<Jet> out) {
        const auto& du = in[0];
        std::array<Jet, kMaxDim> up{};
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) up[a] += md->ginv_jet(a, b) * du[b];
        Jet norm;
        for (int a = 0; a < d; ++a) norm += up[a] * du[a];
        for (int a = 0; a < d; ++a)
          for (int b = a; b < d; ++b) {
            const Jet v = scale * (up[a] * up[b] - 0.5 * md->ginv_jet(a, b) * norm);
            out[a * d + b] = v;
            out[b * d + a] = v;
          }
      });
  return StressEnergyField(std::move(t));
}

TensorDensityField stress_energy_divergence(const StressEnergyField& t, const MetricField& m) {
  return contract(covariant_derivative(t.up(), m), 1, 2);
}

CurrentReport conserved_current(const TensorDensityField& k, const StressEnergyField& t,
                                const MetricField& m, const GridSpec& sites,
                                double killing_tolerance) {
  if (k.signature() != IndexSignature{Slot::Up} || k.weight() != 0.0)
    throw PreconditionError("conserved_current needs a weight-0 vector k");
  if (!k.chart().same_coordinates(m.chart()) || !t.chart().same_coordinates(m.chart()))
    throw PreconditionError("k, T and the metric must share a chart");
  const auto k_low = lower_index(k, m, 0);
  auto current = contract(tensor_product(k_low, t.up()), 0, 1);
  const auto dk = covariant_derivative(k_low, m);
  auto killing_term = contract(contract(tensor_product(dk, t.up()), 0, 2), 0, 1);
  auto conservation_term =
      contract(tensor_product(k_low, stress_energy_divergence(t, m)), 0, 1);

  CurrentReport r{std::move(current), std::move(killing_term), std::move(conservation_term), 0.0,
                  {}};
  r.killing_residual = max_abs(symmetrized_sum(dk, 0, 1), sites);
  if (r.killing_residual > killing_tolerance) {
    std::ostringstream os;
    os << "k is not a Killing vector (residual " << r.killing_residual << " > "
       << killing_tolerance << "); the current is not conserved by symmetry alone";
    r.warnings.push_back(os.str());
  }
  return r;
}

}  // namespace covar
