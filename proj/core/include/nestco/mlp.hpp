#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nestco/random.hpp"
#include "nestco/tensor.hpp"

namespace nestco::nn {

/// Affine map y = x W + b with W stored row-major as [in x out].
struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  bool operator==(const Linear&) const = default;
};

struct Relu {
  bool operator==(const Relu&) const = default;
};

/// Batch normalization over the feature axis of [batch x dim] inputs.
/// A frozen layer always normalizes with its running statistics and is
/// excluded from optimization.
struct BatchNorm1d {
  std::size_t dim = 0;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  bool frozen = false;

  bool operator==(const BatchNorm1d&) const = default;
};

using Layer = std::variant<Linear, Relu, BatchNorm1d>;

/// Weights and biases uniform in +-sqrt(1/fan_in).
Linear make_linear(std::size_t in, std::size_t out, Rng& rng);
/// gamma = 1, beta = 0, running mean 0 and variance 1.
BatchNorm1d make_batchnorm(std::size_t dim);

struct ForwardOptions {
  /// Nested truncation applied at every registered position. Unset = all channels.
  std::optional<std::size_t> mask_k;
  /// Unfrozen BN uses batch statistics and updates its running statistics.
  bool training = false;
};

/// Mutable view of one parameter array.
struct ParamRef {
  std::string name;
  std::span<double> values;
  bool trainable = true;
};

/// Leaf tensors that carry a model's parameter values through one pass and
/// collect their gradients.
struct ParamBinding {
  std::vector<ad::Tensor> tensors;

  /// Gradient per parameter, empty span where none was produced.
  std::vector<std::span<const double>> grads() const;
};

/// Stack of layers with optional nested-dropout positions.
///
/// A position i means the output of layer i is truncated to its first k
/// features. The container has value semantics: copies are independent.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers, std::set<std::size_t> nested_positions = {});

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const std::set<std::size_t>& nested_positions() const noexcept { return nested_positions_; }

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  /// Feature width of the output of layer i.
  std::size_t width_after(std::size_t layer_index) const;
  bool has_nested() const noexcept { return !nested_positions_.empty(); }
  /// Channel count K at the last nested position (0 when none is registered).
  std::size_t nested_channels() const;

  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;

  ParamBinding bind(bool requires_grad) const;

  /// Differentiable pass. Training mode updates running statistics of
  /// unfrozen batch-norm layers.
  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x, const ForwardOptions& opts,
                     const ParamBinding& binding);

  /// Evaluation pass: running statistics, no recording, no mutation.
  ad::Tensor infer(const ad::Tensor& x, std::optional<std::size_t> mask_k = std::nullopt) const;

  /// Evaluation pass through layers [begin, end) only; x must have the width
  /// feeding layer `begin`. Masks at registered positions inside the range apply.
  ad::Tensor infer_layers(const ad::Tensor& x, std::size_t begin, std::size_t end,
                          std::optional<std::size_t> mask_k = std::nullopt) const;

  void freeze_batchnorm();
  std::size_t batchnorm_count() const;

  bool operator==(const Mlp&) const = default;

 private:
  void validate() const;
  void check_input(const ad::Tensor& x, std::optional<std::size_t> mask_k) const;
  struct StatsUpdate {
    std::size_t layer;
    std::vector<double> mean;
    std::vector<double> var;
  };
  ad::Tensor run(ad::Tape& tape, const ad::Tensor& x, const ForwardOptions& opts,
                 const ParamBinding& binding, std::vector<StatsUpdate>* updates,
                 std::size_t begin, std::size_t end) const;

  std::vector<Layer> layers_;
  std::set<std::size_t> nested_positions_;
};

/// Training-mode batch normalization as a differentiable op. Writes the batch
/// mean and (unbiased) variance through the out-parameters.
ad::Tensor batchnorm_train(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& gamma,
                           const ad::Tensor& beta, double eps, std::vector<double>& batch_mean,
                           std::vector<double>& batch_var_unbiased);

/// Normalization with fixed statistics (evaluation mode or frozen layer).
ad::Tensor batchnorm_fixed(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& gamma,
                           const ad::Tensor& beta, std::span<const double> mean,
                           std::span<const double> var, double eps);

}  // namespace nestco::nn
