#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace nestco::data {

/// Noisy 1-d regression sample set. truth holds the noise-free targets and is
/// only used for evaluation.
struct RegressionDataset {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> truth;

  std::size_t size() const noexcept { return x.size(); }
  void validate() const;

  bool operator==(const RegressionDataset&) const = default;
};

/// Classification data carrying both the observed (noisy) label and the true
/// label of every sample. Features are row-major [size x dim].
struct NoisyClassificationDataset {
  std::size_t dim = 0;
  std::size_t class_count = 0;
  std::vector<double> features;
  std::vector<int> noisy_labels;
  std::vector<int> true_labels;
  /// clean_flags[i] == (noisy_labels[i] == true_labels[i]).
  std::vector<std::uint8_t> clean_flags;

  std::size_t size() const noexcept { return noisy_labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  double noise_rate() const;

  /// Throws ValidationError when labels, flags or sizes are inconsistent.
  void validate() const;
  /// Recomputes clean_flags from the two label arrays.
  void refresh_flags();
  NoisyClassificationDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const NoisyClassificationDataset&) const = default;
};

RegressionDataset gen_toy_regression(std::size_t n, double lo, double hi, double noise_std,
                                     std::uint64_t seed);

/// Balanced isotropic Gaussian classes with means on a sphere of radius
/// `separation`. The result is clean (noisy labels equal true labels).
NoisyClassificationDataset gen_gaussian_blobs(std::size_t n, std::size_t classes, std::size_t dim,
                                              double separation, std::uint64_t seed);

/// Flips each label with probability eta to a uniformly drawn different class.
NoisyClassificationDataset inject_symmetric_noise(NoisyClassificationDataset ds, double eta,
                                                  std::uint64_t seed);

/// Flips each label with probability eta to (label + 1) mod class_count.
NoisyClassificationDataset inject_pairflip_noise(NoisyClassificationDataset ds, double eta,
                                                 std::uint64_t seed);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Splits {
  NoisyClassificationDataset train;
  NoisyClassificationDataset val;
  NoisyClassificationDataset test;
};

/// Stratified shuffle-then-partition. Per class, each split receives the floor
/// or ceiling of its fractional share.
Splits split(const NoisyClassificationDataset& ds, const SplitSpec& spec);

/// Index form of split(), exposed for the partition-law tests.
std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(const NoisyClassificationDataset& ds, const SplitSpec& spec);

}  // namespace nestco::data
