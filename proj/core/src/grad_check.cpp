#include "nestco/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nestco/error.hpp"
#include "nestco/random.hpp"

namespace nestco::ad {

namespace {

double evaluate(const ScalarFn& fn) {
  Tape tape;
  Tensor out = fn(tape);
  if (out.size() != 1) {
    throw ContractError("grad_check: function must return a scalar, got " +
                        to_string(out.shape()));
  }
  return out.item();
}

}  // namespace

double grad_check(const ScalarFn& fn, std::span<Tensor> inputs, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) throw ValidationError("grad_check: eps must be positive");
  for (auto& t : inputs) {
    if (!t.requires_grad()) throw ContractError("grad_check: every input must require grad");
    t.zero_grad();
  }

  {
    Tape tape;
    Tensor out = fn(tape);
    if (out.size() != 1) {
      throw ContractError("grad_check: function must return a scalar, got " +
                          to_string(out.shape()));
    }
    tape.backward(out);
  }

  Rng rng(opts.seed);
  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_input && *opts.max_coords_per_input < coords.size()) {
      // Partial Fisher-Yates: the first m entries become a uniform sample.
      const auto m = *opts.max_coords_per_input;
      for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(coords.size() - i));
        std::swap(coords[i], coords[std::min(j, coords.size() - 1)]);
      }
      coords.resize(m);
    }

    auto values = t.mutable_values();
    for (auto i : coords) {
      const double saved = values[i];
      values[i] = saved + opts.eps;
      const double up = evaluate(fn);
      values[i] = saved - opts.eps;
      const double down = evaluate(fn);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double err =
          std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace nestco::ad
