#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nestco/mlp.hpp"

namespace nestco::nn {

/// Linear warm-up followed by step decay at epoch boundaries.
struct LrSchedule {
  double base_lr = 0.1;
  std::size_t warmup_iters = 0;
  /// (epoch, factor): from that epoch on the rate is multiplied by factor.
  std::vector<std::pair<std::size_t, double>> decay;

  void validate() const;
};

/// Learning rate for a global iteration count and 0-based epoch.
///
/// While iter < warmup_iters the rate ramps linearly as
/// (iter + 1) / warmup_iters * base_lr, reaching base_lr on the last warm-up
/// iteration. Afterwards base_lr is scaled by every factor whose epoch has
/// been reached.
double lr_at(const LrSchedule& schedule, std::size_t iter, std::size_t epoch);

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule schedule;

  double base_lr() const { return schedule.base_lr; }
  void validate() const;
};

/// Momentum buffers, one per parameter array, created lazily on first step.
struct SgdState {
  std::vector<std::vector<double>> velocity;

  bool operator==(const SgdState&) const = default;
};

/// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
///
/// Non-trainable parameters are skipped entirely. An empty gradient span is
/// treated as zero.
void sgd_step(std::span<const ParamRef> params, std::span<const std::span<const double>> grads,
              SgdState& state, const SgdConfig& config, double lr);

/// Adam moment estimates plus the step counter used for bias correction.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  bool operator==(const AdamState&) const = default;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(std::span<const ParamRef> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config);

}  // namespace nestco::nn
