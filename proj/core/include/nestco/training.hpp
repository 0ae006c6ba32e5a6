#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nestco/datasets.hpp"
#include "nestco/mlp.hpp"
#include "nestco/optim.hpp"

namespace nestco::nn {

/// Feature rows of a dataset as an [n x dim] tensor (all rows when indices is empty).
ad::Tensor feature_matrix(const data::NoisyClassificationDataset& ds,
                          std::span<const std::size_t> indices = {});

/// One SGD step on mean cross-entropy over the given rows. Returns the mean
/// loss before the update; throws TrainingError on a non-finite loss.
double train_step_ce(Mlp& model, SgdState& state, const SgdConfig& config, double lr,
                     const ad::Tensor& x, std::span<const int> labels,
                     std::optional<std::size_t> mask_k);

/// Unreduced cross-entropy per row, evaluation mode.
std::vector<double> per_sample_losses(const Mlp& model, const ad::Tensor& x,
                                      std::span<const int> labels,
                                      std::optional<std::size_t> mask_k = std::nullopt);

/// Row-wise class probabilities, evaluation mode, [n x C] flattened.
std::vector<double> predict_proba(const Mlp& model, const ad::Tensor& x,
                                  std::optional<std::size_t> mask_k = std::nullopt);

std::vector<int> argmax_rows(std::span<const double> scores, std::size_t cols);

/// Fraction of rows whose prediction matches the TRUE label.
double accuracy(const Mlp& model, const data::NoisyClassificationDataset& ds,
                std::optional<std::size_t> mask_k = std::nullopt);

}  // namespace nestco::nn
