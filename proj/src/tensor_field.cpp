#include "covar/tensor_field.hpp"

#include <cmath>
#include <limits>

#include "covar/error.hpp"

namespace covar {

std::string signature_string(const IndexSignature& sig) {
  std::string s;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (i) s += ",";
    s += sig[i] == Slot::Up ? "up" : "down";
  }
  return "[" + s + "]";
}

int flat_index(std::span<const int> idx, int dim) {
  int f = 0;
  for (int i : idx) f = f * dim + i;
  return f;
}

void unflat_index(int flat, int rank, int dim, std::span<int> idx) {
  for (int k = rank - 1; k >= 0; --k) {
    idx[k] = flat % dim;
    flat /= dim;
  }
}

struct TensorDensityField::Impl {
  enum class Kind { Expressions, Evaluator, Samples };

  CoordinateChart chart;
  IndexSignature sig;
  double weight = 0.0;
  int comps = 1;
  Kind kind = Kind::Expressions;

  std::vector<Expr> exprs;
  std::vector<Expr> derivs;  // [component * dim + axis]
  JetEvaluator evaluator;
  bool differentiable = true;
  std::optional<SampledField> samples;

  Impl(CoordinateChart c, IndexSignature s, double w)
      : chart(std::move(c)), sig(std::move(s)), weight(w) {
    comps = component_count(chart.dim(), static_cast<int>(sig.size()));
    if (!std::isfinite(weight)) throw PreconditionError("density weight must be finite");
  }
};

TensorDensityField TensorDensityField::from_expressions(CoordinateChart chart, IndexSignature sig,
                                                        double weight,
                                                        std::vector<Expr> components) {
  auto impl = std::make_shared<Impl>(std::move(chart), std::move(sig), weight);
  if (static_cast<int>(components.size()) != impl->comps)
    throw PreconditionError("field with index signature " + signature_string(impl->sig) +
                            " needs " + std::to_string(impl->comps) + " components, got " +
                            std::to_string(components.size()));
  const int d = impl->chart.dim();
  impl->kind = Impl::Kind::Expressions;
  impl->derivs.reserve(components.size() * d);
  for (const Expr& e : components)
    for (int l = 0; l < d; ++l) impl->derivs.push_back(differentiate(e, l));
  impl->exprs = std::move(components);
  return TensorDensityField(std::move(impl));
}

TensorDensityField TensorDensityField::from_evaluator(CoordinateChart chart, IndexSignature sig,
                                                      double weight, JetEvaluator evaluator,
                                                      bool differentiable) {
  auto impl = std::make_shared<Impl>(std::move(chart), std::move(sig), weight);
  impl->kind = Impl::Kind::Evaluator;
  impl->evaluator = std::move(evaluator);
  impl->differentiable = differentiable;
  return TensorDensityField(std::move(impl));
}

TensorDensityField TensorDensityField::from_samples(IndexSignature sig, double weight,
                                                    SampledField samples) {
  if (static_cast<int>(sig.size()) != samples.rank())
    throw PreconditionError("index signature rank does not match the sampled rank");
  auto impl = std::make_shared<Impl>(samples.grid().chart(), std::move(sig), weight);
  impl->kind = Impl::Kind::Samples;
  impl->samples.emplace(std::move(samples));
  return TensorDensityField(std::move(impl));
}

TensorDensityField TensorDensityField::scalar(CoordinateChart chart, Expr value, double weight) {
  return from_expressions(std::move(chart), {}, weight, {std::move(value)});
}

const IndexSignature& TensorDensityField::signature() const { return impl_->sig; }
double TensorDensityField::weight() const { return impl_->weight; }
const CoordinateChart& TensorDensityField::chart() const { return impl_->chart; }
int TensorDensityField::components() const { return impl_->comps; }
bool TensorDensityField::is_analytic() const { return impl_->kind != Impl::Kind::Samples; }
bool TensorDensityField::differentiable() const {
  return impl_->kind != Impl::Kind::Evaluator || impl_->differentiable;
}
Channel TensorDensityField::channel() const {
  return is_analytic() ? Channel::Analytic : Channel::FiniteDifference;
}

const std::vector<Expr>* TensorDensityField::expressions() const {
  return impl_->kind == Impl::Kind::Expressions ? &impl_->exprs : nullptr;
}

const SampledField& TensorDensityField::samples() const {
  if (!impl_->samples) throw PreconditionError("field is analytic, not sampled");
  return *impl_->samples;
}

void TensorDensityField::jets_at(std::span<const double> x, std::span<Jet> out) const {
  const Impl& im = *impl_;
  switch (im.kind) {
    case Impl::Kind::Expressions: {
      const int d = im.chart.dim();
      for (int c = 0; c < im.comps; ++c) {
        out[c].v = im.exprs[c].eval(x);
        out[c].d = {};
        for (int l = 0; l < d; ++l) out[c].d[l] = im.derivs[c * d + l].eval(x);
      }
      return;
    }
    case Impl::Kind::Evaluator: im.evaluator(x, out); return;
    case Impl::Kind::Samples:
      throw PreconditionError("sampled field can only be read at lattice nodes");
  }
}

std::vector<double> TensorDensityField::values_at(std::span<const double> x) const {
  std::vector<Jet> jets(impl_->comps);
  jets_at(x, jets);
  std::vector<double> v(impl_->comps);
  for (int c = 0; c < impl_->comps; ++c) v[c] = jets[c].v;
  return v;
}

TensorDensityField TensorDensityField::sampled_on(const GridSpec& grid) const {
  if (!is_analytic()) {
    if (impl_->samples->grid() == grid) return *this;
    throw PreconditionError("sampled field lives on a different grid");
  }
  if (!grid.chart().same_coordinates(impl_->chart))
    throw PreconditionError("grid chart does not match the field chart");
  const int comps = impl_->comps;
  SampledField s = sample(
      [&](std::span<const double> x, std::span<double> out) {
        if (impl_->kind == Impl::Kind::Expressions) {
          for (int c = 0; c < comps; ++c) out[c] = impl_->exprs[c].eval(x);
          return;
        }
        std::vector<Jet> jets(comps);
        impl_->evaluator(x, jets);
        for (int c = 0; c < comps; ++c) out[c] = jets[c].v;
      },
      rank(), grid);
  return from_samples(impl_->sig, impl_->weight, std::move(s));
}

void TensorDensityField::values_at_node(const GridSpec& grid, std::size_t node,
                                        std::span<double> out) const {
  if (!is_analytic()) {
    if (impl_->samples->grid().size() != grid.size())
      throw PreconditionError("sampled field lives on a different grid");
    const auto v = impl_->samples->node(node);
    std::copy(v.begin(), v.end(), out.begin());
    return;
  }
  const auto x = grid.coordinates(node);
  const auto v = values_at(std::span<const double>(x.data(), grid.dim()));
  std::copy(v.begin(), v.end(), out.begin());
}

TensorDensityField TensorDensityField::with_weight(double weight) const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->weight = weight;
  return TensorDensityField(std::move(impl));
}

// ---- pointwise machinery ------------------------------------------------------------

namespace {

void require_same_chart(const CoordinateChart& a, const CoordinateChart& b) {
  if (!a.same_coordinates(b)) throw PreconditionError("fields live on different charts");
}

}  // namespace

TensorDensityField apply_pointwise(const MetricField* metric,
                                   const std::vector<TensorDensityField>& inputs,
                                   const KernelSpec& spec, SiteKernel kernel) {
  if (!metric && inputs.empty()) throw PreconditionError("kernel has neither metric nor inputs");
  const CoordinateChart& chart = metric ? metric->chart() : inputs.front().chart();
  for (const auto& in : inputs) require_same_chart(chart, in.chart());
  const int out_comps = component_count(chart.dim(), static_cast<int>(spec.signature.size()));

  bool all_analytic = !metric || metric->is_analytic();
  for (const auto& in : inputs) all_analytic = all_analytic && in.is_analytic();

  if (all_analytic) {
    bool inputs_differentiable = true;
    for (const auto& in : inputs) inputs_differentiable = inputs_differentiable && in.differentiable();
    if (spec.reads_partials && !inputs_differentiable)
      throw PreconditionError("operation needs partial derivatives of a field that has none; "
                              "sample it on a grid first");
    const bool out_differentiable = spec.propagates_partials && inputs_differentiable;
    std::optional<MetricField> m;
    if (metric) m = *metric;
    auto evaluator = [m, inputs, kernel, out_comps, out_differentiable](
                         std::span<const double> x, std::span<Jet> out) {
      std::optional<MetricPointData> md;
      if (m) md = m->at(x);
      std::vector<std::vector<Jet>> bufs(inputs.size());
      std::vector<std::span<const Jet>> views(inputs.size());
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        bufs[k].resize(inputs[k].components());
        inputs[k].jets_at(x, bufs[k]);
        views[k] = bufs[k];
      }
      kernel(md ? &*md : nullptr, views, out.first(out_comps));
      if (!out_differentiable)
        for (int c = 0; c < out_comps; ++c) out[c] = Jet::opaque(out[c].v);
    };
    return TensorDensityField::from_evaluator(chart, spec.signature, spec.weight, evaluator,
                                              out_differentiable);
  }

  const GridSpec* grid = metric && !metric->is_analytic() ? metric->grid() : nullptr;
  for (const auto& in : inputs)
    if (!grid && !in.is_analytic()) grid = &in.samples().grid();
  std::optional<MetricField> m;
  if (metric) m = metric->sampled_on(*grid);
  std::vector<TensorDensityField> sampled;
  sampled.reserve(inputs.size());
  for (const auto& in : inputs) sampled.push_back(in.sampled_on(*grid));

  const int d = grid->dim();
  std::optional<DifferenceOperator> op;
  if (spec.reads_partials) op.emplace(*grid);
  std::vector<double> values(grid->size() * out_comps);
  std::vector<std::vector<Jet>> bufs(sampled.size());
  std::vector<std::span<const Jet>> views(sampled.size());
  std::vector<double> scratch;
  std::vector<Jet> out(out_comps);
  for (std::size_t node = 0; node < grid->size(); ++node) {
    std::optional<MetricPointData> md;
    if (m) md = m->at_node(node);
    for (std::size_t k = 0; k < sampled.size(); ++k) {
      const SampledField& s = sampled[k].samples();
      const int comps = s.components();
      bufs[k].assign(comps, Jet{});
      const auto v = s.node(node);
      for (int c = 0; c < comps; ++c) bufs[k][c].v = v[c];
      if (op) {
        scratch.resize(comps);
        for (int l = 0; l < d; ++l) {
          op->apply(s, node, l, scratch);
          for (int c = 0; c < comps; ++c) bufs[k][c].d[l] = scratch[c];
        }
      }
      views[k] = bufs[k];
    }
    std::fill(out.begin(), out.end(), Jet{});
    kernel(md ? &*md : nullptr, views, out);
    for (int c = 0; c < out_comps; ++c) values[node * out_comps + c] = out[c].v;
  }
  return TensorDensityField::from_samples(
      spec.signature, spec.weight,
      SampledField(*grid, static_cast<int>(spec.signature.size()), std::move(values)));
}

double max_abs(const TensorDensityField& f, const GridSpec& sites) {
  if (!f.is_analytic() && !(f.samples().grid() == sites))
    throw PreconditionError("sampled field lives on a different grid");
  std::vector<double> v(f.components());
  double worst = 0.0;
  for (std::size_t node = 0; node < sites.size(); ++node) {
    f.values_at_node(sites, node, v);
    for (double x : v) worst = std::max(worst, std::abs(x));
  }
  return worst;
}

double max_abs_difference(const TensorDensityField& a, const TensorDensityField& b,
                          const GridSpec& sites) {
  if (a.components() != b.components())
    throw PreconditionError("fields have different component counts");
  for (const auto* f : {&a, &b})
    if (!f->is_analytic() && !(f->samples().grid() == sites))
      throw PreconditionError("sampled field lives on a different grid");
  std::vector<double> va(a.components()), vb(b.components());
  double worst = 0.0;
  for (std::size_t node = 0; node < sites.size(); ++node) {
    a.values_at_node(sites, node, va);
    b.values_at_node(sites, node, vb);
    for (std::size_t c = 0; c < va.size(); ++c) worst = std::max(worst, std::abs(va[c] - vb[c]));
  }
  return worst;
}

// ---- algebra ------------------------------------------------------------------------------

namespace {

KernelSpec algebraic(IndexSignature sig, double weight) {
  return KernelSpec{std::move(sig), weight, false, true};
}

std::array<int, 8> decode(int flat, int rank, int dim) {
  std::array<int, 8> idx{};
  unflat_index(flat, rank, dim, std::span<int>(idx.data(), rank));
  return idx;
}

}  // namespace

TensorDensityField lower_index(const TensorDensityField& t, const MetricField& m, int slot) {
  if (slot < 0 || slot >= t.rank() || t.signature()[slot] != Slot::Up)
    throw PreconditionError("lower_index needs an up slot, got " + signature_string(t.signature()));
  IndexSignature sig = t.signature();
  sig[slot] = Slot::Down;
  const int d = t.dim(), rank = t.rank();
  return apply_pointwise(&m, {t}, algebraic(sig, t.weight()),
                         [d, rank, slot](const MetricPointData* md, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < out.size(); ++c) {
                             auto idx = decode(static_cast<int>(c), rank, d);
                             const int mu = idx[slot];
                             Jet acc;
                             for (int nu = 0; nu < d; ++nu) {
                               idx[slot] = nu;
                               acc += md->g_jet(mu, nu) *
                                      in[0][flat_index(std::span<const int>(idx.data(), rank), d)];
                             }
                             out[c] = acc;
                           }
                         });
}

TensorDensityField raise_index(const TensorDensityField& t, const MetricField& m, int slot) {
  if (slot < 0 || slot >= t.rank() || t.signature()[slot] != Slot::Down)
    throw PreconditionError("raise_index needs a down slot, got " + signature_string(t.signature()));
  IndexSignature sig = t.signature();
  sig[slot] = Slot::Up;
  const int d = t.dim(), rank = t.rank();
  return apply_pointwise(&m, {t}, algebraic(sig, t.weight()),
                         [d, rank, slot](const MetricPointData* md, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < out.size(); ++c) {
                             auto idx = decode(static_cast<int>(c), rank, d);
                             const int mu = idx[slot];
                             Jet acc;
                             for (int nu = 0; nu < d; ++nu) {
                               idx[slot] = nu;
                               acc += md->ginv_jet(mu, nu) *
                                      in[0][flat_index(std::span<const int>(idx.data(), rank), d)];
                             }
                             out[c] = acc;
                           }
                         });
}

TensorDensityField contract(const TensorDensityField& t, int slot_a, int slot_b) {
  const auto& s = t.signature();
  if (slot_a == slot_b || slot_a < 0 || slot_b < 0 || slot_a >= t.rank() || slot_b >= t.rank() ||
      s[slot_a] == s[slot_b])
    throw PreconditionError("contraction needs one up and one down slot, got " +
                            signature_string(s));
  IndexSignature sig;
  for (int k = 0; k < t.rank(); ++k)
    if (k != slot_a && k != slot_b) sig.push_back(s[k]);
  const int d = t.dim(), rank = t.rank(), out_rank = static_cast<int>(sig.size());
  return apply_pointwise(
      nullptr, {t}, algebraic(sig, t.weight()),
      [=](const MetricPointData*, auto in, std::span<Jet> out) {
        for (std::size_t c = 0; c < out.size(); ++c) {
          const auto oidx = decode(static_cast<int>(c), out_rank, d);
          std::array<int, 8> idx{};
          for (int k = 0, o = 0; k < rank; ++k)
            if (k != slot_a && k != slot_b) idx[k] = oidx[o++];
          Jet acc;
          for (int i = 0; i < d; ++i) {
            idx[slot_a] = idx[slot_b] = i;
            acc += in[0][flat_index(std::span<const int>(idx.data(), rank), d)];
          }
          out[c] = acc;
        }
      });
}

TensorDensityField tensor_product(const TensorDensityField& a, const TensorDensityField& b) {
  IndexSignature sig = a.signature();
  sig.insert(sig.end(), b.signature().begin(), b.signature().end());
  const int nb = b.components();
  return apply_pointwise(nullptr, {a, b}, algebraic(sig, a.weight() + b.weight()),
                         [nb](const MetricPointData*, auto in, std::span<Jet> out) {
                           for (std::size_t i = 0; i < in[0].size(); ++i)
                             for (int j = 0; j < nb; ++j) out[i * nb + j] = in[0][i] * in[1][j];
                         });
}

TensorDensityField linear_combination(double ca, const TensorDensityField& a, double cb,
                                      const TensorDensityField& b) {
  if (a.signature() != b.signature() || a.weight() != b.weight())
    throw PreconditionError("linear combination needs equal index signatures and weights");
  return apply_pointwise(nullptr, {a, b}, algebraic(a.signature(), a.weight()),
                         [ca, cb](const MetricPointData*, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < out.size(); ++c)
                             out[c] = ca * in[0][c] + cb * in[1][c];
                         });
}

TensorDensityField scaled(const TensorDensityField& t, double factor) {
  return apply_pointwise(nullptr, {t}, algebraic(t.signature(), t.weight()),
                         [factor](const MetricPointData*, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < out.size(); ++c) out[c] = factor * in[0][c];
                         });
}

TensorDensityField symmetrized_sum(const TensorDensityField& t, int slot_a, int slot_b) {
  const auto& s = t.signature();
  if (slot_a < 0 || slot_b < 0 || slot_a >= t.rank() || slot_b >= t.rank() || s[slot_a] != s[slot_b])
    throw PreconditionError("symmetrization needs two slots of the same kind");
  const int d = t.dim(), rank = t.rank();
  return apply_pointwise(nullptr, {t}, algebraic(s, t.weight()),
                         [=](const MetricPointData*, auto in, std::span<Jet> out) {
                           for (std::size_t c = 0; c < out.size(); ++c) {
                             auto idx = decode(static_cast<int>(c), rank, d);
                             std::swap(idx[slot_a], idx[slot_b]);
                             out[c] = in[0][c] +
                                      in[0][flat_index(std::span<const int>(idx.data(), rank), d)];
                           }
                         });
}

TensorDensityField densitize(const TensorDensityField& t, const MetricField& m, double power) {
  return apply_pointwise(&m, {t}, algebraic(t.signature(), t.weight() + power),
                         [power](const MetricPointData* md, auto in, std::span<Jet> out) {
                           const Jet factor = pow(md->sqrt_det_jet(), power);
                           for (std::size_t c = 0; c < out.size(); ++c) out[c] = factor * in[0][c];
                         });
}

TensorDensityField metric_tensor(const MetricField& m) {
  const int d = m.dim();
  if (m.is_analytic()) {
    std::vector<Expr> comps(d * d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) comps[a * d + b] = m.component(a, b);
    return TensorDensityField::from_expressions(m.chart(), {Slot::Down, Slot::Down}, 0.0, comps);
  }
  return apply_pointwise(&m, {}, algebraic({Slot::Down, Slot::Down}, 0.0),
                         [d](const MetricPointData* md, auto, std::span<Jet> out) {
                           for (int a = 0; a < d; ++a)
                             for (int b = 0; b < d; ++b) out[a * d + b] = md->g_jet(a, b);
                         });
}

TensorDensityField sqrt_det_density(const MetricField& m) {
  return apply_pointwise(&m, {}, algebraic({}, 1.0),
                         [](const MetricPointData* md, auto, std::span<Jet> out) {
                           out[0] = md->sqrt_det_jet();
                         });
}

}  // namespace covar
