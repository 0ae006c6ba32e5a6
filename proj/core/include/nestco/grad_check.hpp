#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "nestco/tensor.hpp"

namespace nestco::ad {

struct GradCheckOptions {
  double eps = 1e-4;
  /// Check at most this many coordinates per input, drawn without replacement.
  /// Unset checks every coordinate.
  std::optional<std::size_t> max_coords_per_input;
  std::uint64_t seed = 0;
};

/// Builds the scalar function under test on the given tape. It must read the
/// current values of the tensors passed to grad_check.
using ScalarFn = std::function<Tensor(Tape&)>;

/// Compares reverse-mode gradients against central differences.
///
/// Returns max over checked coordinates of
/// |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
/// Inputs must require grad; their values are restored on return.
double grad_check(const ScalarFn& fn, std::span<Tensor> inputs, const GradCheckOptions& opts = {});

}  // namespace nestco::ad
