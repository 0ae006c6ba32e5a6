#include "nestco/mlp.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "nestco/error.hpp"
#include "nestco/nested_dropout.hpp"

namespace nestco::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> uniform_vector(std::size_t n, double bound, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = (2.0 * uniform01(rng) - 1.0) * bound;
  return v;
}

}  // namespace

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw DimensionError("linear layer dimensions must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  Linear layer;
  layer.in = in;
  layer.out = out;
  layer.weight = uniform_vector(in * out, bound, rng);
  layer.bias = uniform_vector(out, bound, rng);
  return layer;
}

BatchNorm1d make_batchnorm(std::size_t dim) {
  if (dim == 0) throw DimensionError("batch-norm dimension must be positive");
  BatchNorm1d bn;
  bn.dim = dim;
  bn.gamma.assign(dim, 1.0);
  bn.beta.assign(dim, 0.0);
  bn.running_mean.assign(dim, 0.0);
  bn.running_var.assign(dim, 1.0);
  return bn;
}

std::vector<std::span<const double>> ParamBinding::grads() const {
  std::vector<std::span<const double>> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(t.has_grad() ? t.grad() : std::span<const double>{});
  return out;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<Layer> layers, std::set<std::size_t> nested_positions)
    : layers_(std::move(layers)), nested_positions_(std::move(nested_positions)) {
  validate();
}

void Mlp::validate() const {
  if (layers_.empty()) throw DimensionError("mlp needs at least one layer");
  std::size_t width = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit(Overloaded{
                   [&](const Linear& l) {
                     if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
                       throw DimensionError("layer " + std::to_string(i) +
                                            ": linear parameter sizes do not match " +
                                            std::to_string(l.in) + "x" + std::to_string(l.out));
                     }
                     if (width != 0 && l.in != width) {
                       throw DimensionError("layer " + std::to_string(i) + ": expects " +
                                            std::to_string(l.in) + " inputs but receives " +
                                            std::to_string(width));
                     }
                     width = l.out;
                   },
                   [&](const Relu&) {
                     if (width == 0) throw DimensionError("mlp must start with a linear layer");
                   },
                   [&](const BatchNorm1d& bn) {
                     if (width == 0) throw DimensionError("mlp must start with a linear layer");
                     if (bn.dim != width || bn.gamma.size() != width || bn.beta.size() != width ||
                         bn.running_mean.size() != width || bn.running_var.size() != width) {
                       throw DimensionError("layer " + std::to_string(i) +
                                            ": batch-norm width does not match " +
                                            std::to_string(width));
                     }
                   },
               },
               layers_[i]);
  }
  for (auto p : nested_positions_) {
    if (p >= layers_.size()) {
      throw DimensionError("nested position " + std::to_string(p) + " beyond last layer");
    }
  }
}

std::size_t Mlp::input_dim() const {
  if (layers_.empty()) return 0;
  return std::get<Linear>(layers_.front()).in;
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : width_after(layers_.size() - 1);
}

std::size_t Mlp::width_after(std::size_t layer_index) const {
  std::size_t width = 0;
  for (std::size_t i = 0; i <= layer_index && i < layers_.size(); ++i) {
    if (const auto* l = std::get_if<Linear>(&layers_[i])) width = l->out;
  }
  return width;
}

std::size_t Mlp::nested_channels() const {
  return nested_positions_.empty() ? 0 : width_after(*nested_positions_.rbegin());
}

std::vector<ParamRef> Mlp::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto prefix = "layer" + std::to_string(i) + ".";
    if (auto* l = std::get_if<Linear>(&layers_[i])) {
      out.push_back({prefix + "weight", l->weight, true});
      out.push_back({prefix + "bias", l->bias, true});
    } else if (auto* bn = std::get_if<BatchNorm1d>(&layers_[i])) {
      out.push_back({prefix + "gamma", bn->gamma, !bn->frozen});
      out.push_back({prefix + "beta", bn->beta, !bn->frozen});
    }
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    if (const auto* l = std::get_if<Linear>(&layer)) n += l->weight.size() + l->bias.size();
    if (const auto* bn = std::get_if<BatchNorm1d>(&layer)) n += 2 * bn->dim;
  }
  return n;
}

ParamBinding Mlp::bind(bool requires_grad) const {
  ParamBinding binding;
  for (const auto& layer : layers_) {
    if (const auto* l = std::get_if<Linear>(&layer)) {
      binding.tensors.push_back(ad::Tensor::matrix(l->in, l->out, l->weight, requires_grad));
      binding.tensors.push_back(ad::Tensor::vector(l->bias, requires_grad));
    } else if (const auto* bn = std::get_if<BatchNorm1d>(&layer)) {
      const bool grad = requires_grad && !bn->frozen;
      binding.tensors.push_back(ad::Tensor::vector(bn->gamma, grad));
      binding.tensors.push_back(ad::Tensor::vector(bn->beta, grad));
    }
  }
  return binding;
}

void Mlp::check_input(const ad::Tensor& x, std::optional<std::size_t> mask_k) const {
  if (x.rank() != 2 || x.shape()[1] != input_dim()) {
    throw DimensionError("mlp expects input [n x " + std::to_string(input_dim()) + "], got " +
                         ad::to_string(x.shape()));
  }
  if (mask_k) {
    if (nested_positions_.empty()) {
      throw ValidationError("mask_k given but the model has no nested-dropout position");
    }
    for (auto p : nested_positions_) {
      const auto width = width_after(p);
      if (*mask_k < 1 || *mask_k > width) {
        throw ValidationError("mask_k = " + std::to_string(*mask_k) + " outside [1, " +
                              std::to_string(width) + "]");
      }
    }
  }
}

ad::Tensor Mlp::run(ad::Tape& tape, const ad::Tensor& x, const ForwardOptions& opts,
                    const ParamBinding& binding, std::vector<StatsUpdate>* updates,
                    std::size_t begin, std::size_t end) const {
  ad::Tensor h = x;
  std::size_t param = 0;
  for (std::size_t i = 0; i < begin; ++i) {
    if (!std::holds_alternative<Relu>(layers_[i])) param += 2;
  }
  for (std::size_t i = begin; i < end; ++i) {
    std::visit(Overloaded{
                   [&](const Linear&) {
                     h = ad::affine(tape, h, binding.tensors.at(param),
                                    binding.tensors.at(param + 1));
                     param += 2;
                   },
                   [&](const Relu&) { h = ad::relu(tape, h); },
                   [&](const BatchNorm1d& bn) {
                     const auto& gamma = binding.tensors.at(param);
                     const auto& beta = binding.tensors.at(param + 1);
                     param += 2;
                     if (opts.training && !bn.frozen) {
                       StatsUpdate u{i, {}, {}};
                       h = batchnorm_train(tape, h, gamma, beta, bn.eps, u.mean, u.var);
                       if (updates) updates->push_back(std::move(u));
                     } else {
                       h = batchnorm_fixed(tape, h, gamma, beta, bn.running_mean,
                                           bn.running_var, bn.eps);
                     }
                   },
               },
               layers_[i]);
    if (opts.mask_k && nested_positions_.contains(i)) {
      h = nested::apply_nested_mask(tape, h, *opts.mask_k);
    }
  }
  return h;
}

ad::Tensor Mlp::forward(ad::Tape& tape, const ad::Tensor& x, const ForwardOptions& opts,
                        const ParamBinding& binding) {
  check_input(x, opts.mask_k);
  std::vector<StatsUpdate> updates;
  auto out = run(tape, x, opts, binding, &updates, 0, layers_.size());
  for (auto& u : updates) {
    auto& bn = std::get<BatchNorm1d>(layers_[u.layer]);
    for (std::size_t j = 0; j < bn.dim; ++j) {
      bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * u.mean[j];
      bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * u.var[j];
    }
  }
  return out;
}

ad::Tensor Mlp::infer(const ad::Tensor& x, std::optional<std::size_t> mask_k) const {
  check_input(x, mask_k);
  ad::Tape tape;
  ForwardOptions opts;
  opts.mask_k = mask_k;
  return run(tape, x, opts, bind(false), nullptr, 0, layers_.size());
}

ad::Tensor Mlp::infer_layers(const ad::Tensor& x, std::size_t begin, std::size_t end,
                             std::optional<std::size_t> mask_k) const {
  if (begin > end || end > layers_.size()) throw DimensionError("infer_layers: bad layer range");
  if (begin == 0) {
    check_input(x, std::nullopt);
  } else if (x.rank() != 2 || x.shape()[1] != width_after(begin - 1)) {
    throw DimensionError("infer_layers: input " + ad::to_string(x.shape()) +
                         " does not feed layer " + std::to_string(begin));
  }
  if (mask_k) {
    for (auto p : nested_positions_) {
      if (p >= begin && p < end && (*mask_k < 1 || *mask_k > width_after(p))) {
        throw ValidationError("mask_k = " + std::to_string(*mask_k) + " outside [1, " +
                              std::to_string(width_after(p)) + "]");
      }
    }
  }
  ad::Tape tape;
  ForwardOptions opts;
  opts.mask_k = mask_k;
  return run(tape, x, opts, bind(false), nullptr, begin, end);
}

void Mlp::freeze_batchnorm() {
  for (auto& layer : layers_) {
    if (auto* bn = std::get_if<BatchNorm1d>(&layer)) bn->frozen = true;
  }
}

std::size_t Mlp::batchnorm_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += std::holds_alternative<BatchNorm1d>(layer) ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Batch normalization ops

ad::Tensor batchnorm_train(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& gamma,
                           const ad::Tensor& beta, double eps, std::vector<double>& batch_mean,
                           std::vector<double>& batch_var_unbiased) {
  if (x.rank() != 2 || gamma.size() != x.shape()[1] || beta.size() != x.shape()[1]) {
    throw DimensionError("batchnorm: input " + ad::to_string(x.shape()) + " vs gamma " +
                         ad::to_string(gamma.shape()));
  }
  const auto n = x.shape()[0];
  const auto d = x.shape()[1];
  if (n < 2) {
    throw ContractError("batchnorm: training mode needs a batch of at least 2, got " +
                        std::to_string(n));
  }
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  const double nn = static_cast<double>(n);

  std::vector<double> mu(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += xv[i * d + j];
  }
  for (auto& m : mu) m /= nn;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[i * d + j] - mu[j];
      var[j] += c * c;
    }
  }
  for (auto& v : var) v /= nn;

  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  std::vector<double> xhat(n * d);
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xv[i * d + j] - mu[j]) * inv_std[j];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }

  batch_mean = mu;
  batch_var_unbiased.resize(d);
  for (std::size_t j = 0; j < d; ++j) batch_var_unbiased[j] = var[j] * nn / (nn - 1.0);

  const bool needs_grad = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  ad::Tensor result(x.shape(), std::move(out), needs_grad);
  if (needs_grad) {
    tape.record(result, [x, gamma, beta, result, xhat = std::move(xhat),
                         inv_std = std::move(inv_std), n, d]() mutable {
      const auto g = result.grad();
      const auto gv = gamma.values();
      std::vector<double> sum_g(d, 0.0);
      std::vector<double> sum_gx(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          sum_g[j] += g[i * d + j];
          sum_gx[j] += g[i * d + j] * xhat[i * d + j];
        }
      }
      if (gamma.requires_grad()) {
        auto gg = gamma.ensure_grad();
        for (std::size_t j = 0; j < d; ++j) gg[j] += sum_gx[j];
      }
      if (beta.requires_grad()) {
        auto gb = beta.ensure_grad();
        for (std::size_t j = 0; j < d; ++j) gb[j] += sum_g[j];
      }
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        const double nn = static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            // d/dx of gamma * xhat, with dxhat = g * gamma.
            gx[i * d + j] += gv[j] * inv_std[j] / nn *
                             (nn * g[i * d + j] - sum_g[j] - xhat[i * d + j] * sum_gx[j]);
          }
        }
      }
    });
  }
  return result;
}

ad::Tensor batchnorm_fixed(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& gamma,
                           const ad::Tensor& beta, std::span<const double> mean,
                           std::span<const double> var, double eps) {
  if (x.rank() != 2 || gamma.size() != x.shape()[1] || beta.size() != x.shape()[1] ||
      mean.size() != x.shape()[1] || var.size() != x.shape()[1]) {
    throw DimensionError("batchnorm: input " + ad::to_string(x.shape()) + " vs gamma " +
                         ad::to_string(gamma.shape()));
  }
  const auto n = x.shape()[0];
  const auto d = x.shape()[1];
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  std::vector<double> centered(mean.begin(), mean.end());
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = gv[j] * (xv[i * d + j] - centered[j]) * inv_std[j] + bv[j];
    }
  }
  const bool needs_grad = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  ad::Tensor result(x.shape(), std::move(out), needs_grad);
  if (needs_grad) {
    tape.record(result, [x, gamma, beta, result, centered = std::move(centered),
                         inv_std = std::move(inv_std), n, d]() mutable {
      const auto g = result.grad();
      const auto xv = x.values();
      const auto gv = gamma.values();
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * gv[j] * inv_std[j];
        }
      }
      if (gamma.requires_grad()) {
        auto gg = gamma.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            gg[j] += g[i * d + j] * (xv[i * d + j] - centered[j]) * inv_std[j];
          }
        }
      }
      if (beta.requires_grad()) {
        auto gb = beta.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
      }
    });
  }
  return result;
}

}  // namespace nestco::nn
