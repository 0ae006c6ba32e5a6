#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nestco/random.hpp"
#include "nestco/tensor.hpp"

namespace nestco::nested {

/// Hyper-parameters of nested dropout on one representation.
struct NestedConfig {
  double sigma_nest = 200.0;
  /// Channel count K of the regularized representation.
  std::size_t channels = 1;

  void validate() const;
};

/// Truncated Gaussian categorical over k = 1..K with p_k proportional to
/// exp(-k^2 / (2 sigma^2)).
class KDistribution {
 public:
  /// Wraps explicit probabilities (normalized on construction). Used for
  /// degenerate distributions in tests; normal code calls k_distribution().
  static KDistribution from_probs(std::vector<double> probs);

  std::size_t channels() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  double prob(std::size_t k) const { return probs_.at(k - 1); }

  /// Inverse-CDF draw in [1, K] using one uniform variate.
  std::size_t sample(Rng& rng) const;

 private:
  explicit KDistribution(std::vector<double> probs);
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

KDistribution k_distribution(const NestedConfig& config);

inline std::size_t sample_k(const KDistribution& dist, Rng& rng) { return dist.sample(rng); }

/// Keeps the first k features of every row and zeroes the rest.
///
/// A rank-1 tensor is treated as one row; for rank >= 2 the mask runs along the
/// last axis, so h of shape [batch x K] is masked per row. No rescaling is
/// applied. Backward routes gradient only into the kept channels.
ad::Tensor apply_nested_mask(ad::Tape& tape, const ad::Tensor& h, std::size_t k);

}  // namespace nestco::nested
