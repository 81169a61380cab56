#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covar/expr.hpp"
#include "covar/grid.hpp"
#include "covar/jet.hpp"
#include "covar/metric.hpp"

namespace covar {

enum class Slot : std::uint8_t { Up, Down };
using IndexSignature = std::vector<Slot>;

std::string signature_string(const IndexSignature& sig);

/// Tensor density of weight w with an ordered list of up/down slots.
/// Backed by component expressions, by a jet-valued evaluator, or by lattice
/// samples. Components are row-major over the slots. Immutable; cheap to copy.
class TensorDensityField {
 public:
  using JetEvaluator = std::function<void(std::span<const double> x, std::span<Jet> out)>;

  static TensorDensityField from_expressions(CoordinateChart chart, IndexSignature sig,
                                             double weight, std::vector<Expr> components);
  /// `differentiable` states whether the evaluator fills in partial derivatives.
  static TensorDensityField from_evaluator(CoordinateChart chart, IndexSignature sig,
                                           double weight, JetEvaluator evaluator,
                                           bool differentiable);
  static TensorDensityField from_samples(IndexSignature sig, double weight, SampledField samples);

  static TensorDensityField scalar(CoordinateChart chart, Expr value, double weight = 0.0);

  const IndexSignature& signature() const;
  int rank() const { return static_cast<int>(signature().size()); }
  double weight() const;
  const CoordinateChart& chart() const;
  int dim() const { return chart().dim(); }
  int components() const;

  bool is_analytic() const;
  /// Analytic fields: whether partial derivatives are available.
  /// Sampled fields are always differentiable (by finite differences).
  bool differentiable() const;
  Channel channel() const;
  /// Component expressions when expression-backed, else nullptr.
  const std::vector<Expr>* expressions() const;
  const SampledField& samples() const;

  /// Analytic fields only.
  void jets_at(std::span<const double> x, std::span<Jet> out) const;
  std::vector<double> values_at(std::span<const double> x) const;

  /// Lattice values. Analytic fields are sampled; sampled fields must live on `grid`.
  TensorDensityField sampled_on(const GridSpec& grid) const;
  /// Component values at a lattice node of `grid`.
  void values_at_node(const GridSpec& grid, std::size_t node, std::span<double> out) const;

  /// Same components reinterpreted with another weight.
  TensorDensityField with_weight(double weight) const;

 private:
  struct Impl;
  explicit TensorDensityField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Row-major component index helpers.
int flat_index(std::span<const int> idx, int dim);
void unflat_index(int flat, int rank, int dim, std::span<int> idx);

// ---- pointwise machinery ----------------------------------------------------------

/// Kernel applied at one evaluation site. `metric` is null when no metric was
/// supplied. `inputs[k]` holds the component jets (values and first partials)
/// of the k-th input field.
using SiteKernel = std::function<void(const MetricPointData* metric,
                                      std::span<const std::span<const Jet>> inputs,
                                      std::span<Jet> out)>;

struct KernelSpec {
  IndexSignature signature;
  double weight = 0.0;
  /// The kernel reads partial derivatives of its inputs.
  bool reads_partials = false;
  /// The kernel propagates derivatives through jet arithmetic, so its output
  /// jets are valid whenever the input jets are.
  bool propagates_partials = false;
};

/// Applies `kernel` pointwise. If every input and the metric are analytic the
/// result is an analytic field evaluated lazily; otherwise all inputs are sampled
/// on their common lattice and the result is a sampled field (finite-difference
/// channel).
TensorDensityField apply_pointwise(const MetricField* metric,
                                   const std::vector<TensorDensityField>& inputs,
                                   const KernelSpec& spec, SiteKernel kernel);

/// Largest |component| over the nodes of `sites`.
double max_abs(const TensorDensityField& f, const GridSpec& sites);
/// Largest |a - b| over the nodes of `sites`, componentwise.
double max_abs_difference(const TensorDensityField& a, const TensorDensityField& b,
                          const GridSpec& sites);

// ---- algebra (derivative-preserving) --------------------------------------------------

TensorDensityField lower_index(const TensorDensityField& t, const MetricField& m, int slot);
TensorDensityField raise_index(const TensorDensityField& t, const MetricField& m, int slot);
/// Contracts an up slot with a down slot.
TensorDensityField contract(const TensorDensityField& t, int slot_a, int slot_b);
/// Outer product; weights add.
TensorDensityField tensor_product(const TensorDensityField& a, const TensorDensityField& b);
TensorDensityField linear_combination(double ca, const TensorDensityField& a, double cb,
                                      const TensorDensityField& b);
TensorDensityField scaled(const TensorDensityField& t, double factor);
/// t(slot_a, slot_b) + t(slot_b, slot_a).
TensorDensityField symmetrized_sum(const TensorDensityField& t, int slot_a, int slot_b);
/// (sqrt g)^power * t, with weight increased by `power`.
TensorDensityField densitize(const TensorDensityField& t, const MetricField& m, double power);
/// g_{mu nu} as a weight-0 down-down tensor.
TensorDensityField metric_tensor(const MetricField& m);
/// sqrt g as a weight-1 scalar density.
TensorDensityField sqrt_det_density(const MetricField& m);

}  // namespace covar
