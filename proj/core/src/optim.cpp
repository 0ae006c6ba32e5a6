#include "nestco/optim.hpp"

#include <cmath>
#include <string>

#include "nestco/error.hpp"

namespace nestco::nn {

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw ValidationError("learning rate must be positive");
  for (std::size_t i = 0; i < decay.size(); ++i) {
    if (!(decay[i].second > 0.0 && decay[i].second <= 1.0)) {
      throw ValidationError("decay factor must lie in (0, 1], got " +
                            std::to_string(decay[i].second));
    }
    if (i > 0 && decay[i].first <= decay[i - 1].first) {
      throw ValidationError("decay epochs must be strictly increasing");
    }
  }
}

double lr_at(const LrSchedule& schedule, std::size_t iter, std::size_t epoch) {
  if (iter < schedule.warmup_iters) {
    return static_cast<double>(iter + 1) / static_cast<double>(schedule.warmup_iters) *
           schedule.base_lr;
  }
  double lr = schedule.base_lr;
  for (const auto& [at, factor] : schedule.decay) {
    if (epoch >= at) lr *= factor;
  }
  return lr;
}

void SgdConfig::validate() const {
  schedule.validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
}

namespace {

// Buffers of parameters that stop receiving gradient decay geometrically into
// the subnormal range, where arithmetic is orders of magnitude slower.
inline double flush_tiny(double x) { return std::abs(x) < 1e-200 ? 0.0 : x; }

void check_aligned(std::span<const ParamRef> params, std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!grads[p].empty() && grads[p].size() != params[p].values.size()) {
      throw DimensionError("optimizer: gradient length mismatch for " + params[p].name);
    }
  }
}

void ensure_buffers(std::vector<std::vector<double>>& buffers, std::span<const ParamRef> params) {
  if (buffers.empty()) {
    buffers.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) buffers[p].assign(params[p].values.size(), 0.0);
  }
  if (buffers.size() != params.size()) {
    throw DimensionError("optimizer state holds " + std::to_string(buffers.size()) +
                         " buffers for " + std::to_string(params.size()) + " parameters");
  }
}

}  // namespace

void sgd_step(std::span<const ParamRef> params, std::span<const std::span<const double>> grads,
              SgdState& state, const SgdConfig& config, double lr) {
  check_aligned(params, grads);
  ensure_buffers(state.velocity, params);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    auto values = params[p].values;
    auto& v = state.velocity[p];
    const auto g = grads[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double grad = (g.empty() ? 0.0 : g[i]) + config.weight_decay * values[i];
      v[i] = flush_tiny(config.momentum * v[i] + grad);
      values[i] -= lr * v[i];
    }
  }
}

void adam_step(std::span<const ParamRef> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config) {
  check_aligned(params, grads);
  ensure_buffers(state.m, params);
  ensure_buffers(state.v, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    auto values = params[p].values;
    auto& m = state.m[p];
    auto& v = state.v[p];
    const auto g = grads[p];
    const std::vector<double> none(g.empty() ? values.size() : 0, 0.0);
    const double* gp = g.empty() ? none.data() : g.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double grad = gp[i];
      m[i] = flush_tiny(config.beta1 * m[i] + (1.0 - config.beta1) * grad);
      v[i] = flush_tiny(config.beta2 * v[i] + (1.0 - config.beta2) * grad * grad);
      values[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
}

}  // namespace nestco::nn
