#include "nestco/nested_dropout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nestco/error.hpp"

namespace nestco::nested {

void NestedConfig::validate() const {
  if (channels < 1) throw ValidationError("nested: channel count K must be at least 1");
  if (!(sigma_nest > 0.0) || !std::isfinite(sigma_nest)) {
    throw ValidationError("nested: sigma_nest must be positive and finite, got " +
                          std::to_string(sigma_nest));
  }
}

KDistribution::KDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  for (auto& p : probs_) p /= total;
  cdf_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
  cdf_.back() = 1.0;
}

KDistribution KDistribution::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw ValidationError("k distribution needs at least one channel");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("k probabilities must be finite and >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw ValidationError("k probabilities sum to zero");
  return KDistribution(std::move(probs));
}

std::size_t KDistribution::sample(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto index = static_cast<std::size_t>(it - cdf_.begin());
  return std::min(index, cdf_.size() - 1) + 1;
}

KDistribution k_distribution(const NestedConfig& config) {
  config.validate();
  const double denom = 2.0 * config.sigma_nest * config.sigma_nest;
  // The exponent is largest at k = 1; shifting by it keeps p_1 = 1 before normalizing.
  const double top = -1.0 / denom;
  std::vector<double> weights(config.channels);
  for (std::size_t k = 1; k <= config.channels; ++k) {
    const double kk = static_cast<double>(k);
    weights[k - 1] = std::exp(-kk * kk / denom - top);
  }
  return KDistribution::from_probs(std::move(weights));
}

ad::Tensor apply_nested_mask(ad::Tape& tape, const ad::Tensor& h, std::size_t k) {
  const std::size_t width = h.shape().empty() ? 1 : h.shape().back();
  if (k < 1 || k > width) {
    throw ValidationError("nested mask: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(width) + "]");
  }
  std::vector<double> out(h.values().begin(), h.values().end());
  const std::size_t rows = out.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(r * width + k),
              out.begin() + static_cast<std::ptrdiff_t>((r + 1) * width), 0.0);
  }
  ad::Tensor result(h.shape(), std::move(out), h.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [h, result, k, width, rows]() mutable {
      auto gh = h.ensure_grad();
      const auto g = result.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) gh[r * width + c] += g[r * width + c];
      }
    });
  }
  return result;
}

}  // namespace nestco::nested
