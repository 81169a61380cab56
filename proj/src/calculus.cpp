#include "covar/calculus.hpp"

#include <algorithm>
#include <cmath>

#include "covar/error.hpp"

namespace covar {

double ChristoffelSymbols::trace(int lambda) const {
  double s = 0.0;
  for (int nu = 0; nu < dim_; ++nu) s += (*this)(nu, lambda, nu);
  return s;
}

ChristoffelSymbols christoffel_symbols(const MetricPointData& md) {
  const int d = md.dim;
  ChristoffelSymbols gamma(d);
  // lowered[s][a][b] = 1/2 (g_{sa,b} + g_{sb,a} - g_{ab,s})
  double lowered[kMaxDim][kMaxDim][kMaxDim];
  for (int s = 0; s < d; ++s)
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b)
        lowered[s][a][b] = 0.5 * (md.dg[b][s][a] + md.dg[a][s][b] - md.dg[s][a][b]);
  for (int mu = 0; mu < d; ++mu)
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        double acc = 0.0;
        for (int s = 0; s < d; ++s) acc += md.ginv[mu][s] * lowered[s][a][b];
        gamma.at(mu, a, b) = acc;
      }
  return gamma;
}

namespace {

void require_chart(const TensorDensityField& t, const MetricField& m) {
  if (!t.chart().same_coordinates(m.chart()))
    throw PreconditionError("field chart (" + std::to_string(t.dim()) +
                            " coordinates) does not match the metric chart");
}

KernelSpec derivative_spec(IndexSignature sig, double weight) {
  return KernelSpec{std::move(sig), weight, true, false};
}

KernelSpec metric_only_spec(IndexSignature sig, double weight) {
  return KernelSpec{std::move(sig), weight, false, false};
}

}  // namespace

TensorDensityField ChristoffelField::components() const {
  const int d = metric_.dim();
  return apply_pointwise(&metric_, {}, metric_only_spec({Slot::Up, Slot::Down, Slot::Down}, 0.0),
                         [d](const MetricPointData* md, auto, std::span<Jet> out) {
                           const auto gamma = christoffel_symbols(*md);
                           for (int mu = 0; mu < d; ++mu)
                             for (int a = 0; a < d; ++a)
                               for (int b = 0; b < d; ++b)
                                 out[(mu * d + a) * d + b].v = gamma(mu, a, b);
                         });
}

ChristoffelField christoffel(const MetricField& m) { return ChristoffelField(m); }

ChristoffelTrace christoffel_trace(const MetricField& m) {
  const int d = m.dim();
  auto log_route = apply_pointwise(&m, {}, metric_only_spec({Slot::Down}, 0.0),
                                   [d](const MetricPointData* md, auto, std::span<Jet> out) {
                                     for (int l = 0; l < d; ++l)
                                       out[l].v = md->d_sqrt_det[l] / md->sqrt_det;
                                   });
  auto contracted = apply_pointwise(&m, {}, metric_only_spec({Slot::Down}, 0.0),
                                    [d](const MetricPointData* md, auto, std::span<Jet> out) {
                                      const auto gamma = christoffel_symbols(*md);
                                      for (int l = 0; l < d; ++l) out[l].v = gamma.trace(l);
                                    });
  return ChristoffelTrace{std::move(log_route), std::move(contracted)};
}

TensorDensityField partial_gradient(const TensorDensityField& t) {
  IndexSignature sig = t.signature();
  sig.push_back(Slot::Down);
  const int d = t.dim();
  if (const auto* exprs = t.expressions()) {
    std::vector<Expr> parts;
    parts.reserve(exprs->size() * d);
    for (const Expr& e : *exprs)
      for (int l = 0; l < d; ++l) parts.push_back(differentiate(e, l));
    return TensorDensityField::from_expressions(t.chart(), sig, t.weight(), std::move(parts));
  }
  return apply_pointwise(nullptr, {t}, derivative_spec(sig, t.weight()),
                         [d](const MetricPointData*, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < in[0].size(); ++c)
                             for (int l = 0; l < d; ++l) out[c * d + l].v = in[0][c].d[l];
                         });
}

TensorDensityField covariant_derivative(const TensorDensityField& t, const MetricField& m) {
  require_chart(t, m);
  IndexSignature sig = t.signature();
  sig.push_back(Slot::Down);
  const IndexSignature slots = t.signature();
  const int d = t.dim(), rank = t.rank();
  const double w = t.weight();
  return apply_pointwise(
      &m, {t}, derivative_spec(sig, w),
      [=](const MetricPointData* md, auto in, std::span<Jet> out) {
        const auto gamma = christoffel_symbols(*md);
        const auto& tc = in[0];
        std::array<int, 8> idx{};
        for (int c = 0; c < static_cast<int>(tc.size()); ++c) {
          unflat_index(c, rank, d, std::span<int>(idx.data(), rank));
          for (int rho = 0; rho < d; ++rho) {
            double acc = tc[c].d[rho];
            for (int k = 0; k < rank; ++k) {
              const int own = idx[k];
              for (int lam = 0; lam < d; ++lam) {
                idx[k] = lam;
                const double other = tc[flat_index(std::span<const int>(idx.data(), rank), d)].v;
                acc += slots[k] == Slot::Up ? gamma(own, lam, rho) * other
                                            : -gamma(lam, own, rho) * other;
              }
              idx[k] = own;
            }
            if (w != 0.0) acc -= w * (md->d_sqrt_det[rho] / md->sqrt_det) * tc[c].v;
            out[c * d + rho].v = acc;
          }
        }
      });
}

TensorDensityField divergence_vector(const TensorDensityField& p, const MetricField& m,
                                     DivergenceRoute route) {
  require_chart(p, m);
  if (p.signature() != IndexSignature{Slot::Up} || p.weight() != 0.0)
    throw PreconditionError("divergence_vector needs a weight-0 vector, got " +
                            signature_string(p.signature()) + " with weight " +
                            std::to_string(p.weight()));
  const int d = p.dim();
  if (route == DivergenceRoute::Christoffel)
    return apply_pointwise(&m, {p}, derivative_spec({}, 0.0),
                           [d](const MetricPointData* md, auto in, std::span<Jet> out) {
                             const auto gamma = christoffel_symbols(*md);
                             double acc = 0.0;
                             for (int nu = 0; nu < d; ++nu) acc += in[0][nu].d[nu];
                             for (int lam = 0; lam < d; ++lam) acc += in[0][lam].v * gamma.trace(lam);
                             out[0].v = acc;
                           });
  const auto dens = densitize(p, m, 1.0);
  return apply_pointwise(&m, {dens}, derivative_spec({}, 0.0),
                         [d](const MetricPointData* md, auto in, std::span<Jet> out) {
                           double acc = 0.0;
                           for (int nu = 0; nu < d; ++nu) acc += in[0][nu].d[nu];
                           out[0].v = acc / md->sqrt_det;
                         });
}

namespace {

double max_symmetric_part(const TensorDensityField& f, const GridSpec& sites) {
  const int d = f.dim();
  std::vector<double> v(f.components());
  double worst = 0.0;
  for (std::size_t node = 0; node < sites.size(); ++node) {
    f.values_at_node(sites, node, v);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) worst = std::max(worst, 0.5 * std::abs(v[a * d + b] + v[b * d + a]));
  }
  return worst;
}

}  // namespace

AntisymmetricDivergence divergence_antisymmetric(const TensorDensityField& f, const MetricField& m,
                                                 const GridSpec* check_sites) {
  require_chart(f, m);
  if (f.signature() != IndexSignature{Slot::Up, Slot::Up})
    throw PreconditionError("divergence_antisymmetric needs an up-up field, got " +
                            signature_string(f.signature()));
  const int d = f.dim();
  double sym = 0.0;
  if (!f.is_analytic()) {
    sym = max_symmetric_part(f, f.samples().grid());
  } else if (check_sites) {
    sym = max_symmetric_part(f, *check_sites);
  } else {
    const GridSpec probe(f.chart(), std::vector<int>(d, 7), 2);
    sym = max_symmetric_part(f, probe);
  }
  if (sym > kAntisymmetryThreshold)
    throw PreconditionError("field is not antisymmetric: max |F^{ab} + F^{ba}|/2 = " +
                            std::to_string(sym));

  const auto dens = densitize(f, m, 1.0);
  auto divergence = apply_pointwise(&m, {dens}, derivative_spec({Slot::Up}, 0.0),
                                    [d](const MetricPointData* md, auto in, std::span<Jet> out) {
                                      for (int a = 0; a < d; ++a) {
                                        double acc = 0.0;
                                        for (int b = 0; b < d; ++b) acc += in[0][a * d + b].d[b];
                                        out[a].v = acc / md->sqrt_det;
                                      }
                                    });
  auto full = contract(covariant_derivative(f, m), 1, 2);
  auto vanishing = apply_pointwise(&m, {f}, metric_only_spec({Slot::Up}, 0.0),
                                   [d](const MetricPointData* md, auto in, std::span<Jet> out) {
                                     const auto gamma = christoffel_symbols(*md);
                                     for (int a = 0; a < d; ++a) {
                                       double acc = 0.0;
                                       for (int mu = 0; mu < d; ++mu)
                                         for (int b = 0; b < d; ++b)
                                           acc += gamma(a, mu, b) * in[0][mu * d + b].v;
                                       out[a].v = acc;
                                     }
                                   });
  return AntisymmetricDivergence{std::move(divergence), std::move(full), std::move(vanishing), sym};
}

TensorDensityField lie_derivative_metric(const TensorDensityField& k, const MetricField& m) {
  require_chart(k, m);
  if (k.signature() != IndexSignature{Slot::Up} || k.weight() != 0.0)
    throw PreconditionError("Lie derivative needs a weight-0 vector, got " +
                            signature_string(k.signature()));
  const int d = k.dim();
  return apply_pointwise(&m, {k}, derivative_spec({Slot::Down, Slot::Down}, 0.0),
                         [d](const MetricPointData* md, auto in, std::span<Jet> out) {
                           const auto& kc = in[0];
                           for (int a = 0; a < d; ++a)
                             for (int b = 0; b < d; ++b) {
                               double acc = 0.0;
                               for (int c = 0; c < d; ++c)
                                 acc += kc[c].v * md->dg[c][a][b] + md->g[a][c] * kc[c].d[b] +
                                        md->g[b][c] * kc[c].d[a];
                               out[a * d + b].v = acc;
                             }
                         });
}

double Tolerance::at(double h) const {
  if (order <= 0 || constant <= 0.0) return floor;
  return std::max(floor, constant * std::pow(h, order));
}

Tolerance Tolerance::calibrate(double err_coarse, double h_coarse, double err_fine, double h_fine,
                               int order, double floor, double safety) {
  const double c = std::max(err_coarse / std::pow(h_coarse, order),
                            err_fine / std::pow(h_fine, order));
  return Tolerance{floor, safety * c, order};
}

KillingReport killing_residual(const TensorDensityField& k, const MetricField& m,
                               const GridSpec& sites, double consistency_tolerance) {
  require_chart(k, m);
  if (k.signature() != IndexSignature{Slot::Up} || k.weight() != 0.0)
    throw PreconditionError("Killing residual needs a weight-0 vector, got " +
                            signature_string(k.signature()));
  auto residual = symmetrized_sum(covariant_derivative(lower_index(k, m, 0), m), 0, 1);
  const auto lie = lie_derivative_metric(k, m);
  KillingReport r{residual, 0.0, 0.0, false};
  r.max_norm = max_abs(residual, sites);
  r.lie_mismatch = max_abs_difference(residual, lie, sites);
  r.consistent = r.lie_mismatch <= consistency_tolerance;
  return r;
}

}  // namespace covar
