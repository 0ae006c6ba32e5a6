#pragma once

#include <cstddef>
#include <vector>

#include "nestco/datasets.hpp"
#include "nestco/mlp.hpp"

namespace nestco::nested {

/// Accuracy against true labels with the nested mask fixed at k.
double truncate_eval(const nn::Mlp& model, const data::NoisyClassificationDataset& ds,
                     std::size_t k);

/// Mean squared error against the given targets with the mask fixed at k.
/// The model maps 1-d inputs to one output.
double truncate_eval(const nn::Mlp& model, const std::vector<double>& x,
                     const std::vector<double>& targets, std::size_t k);

struct KSearchResult {
  std::size_t k_star = 0;
  double score = 0.0;
  /// Validation accuracy for k = 1..K (index k - 1).
  std::vector<double> sweep;
};

/// Sweeps k = 1..K and returns the smallest k with maximal validation accuracy.
KSearchResult find_optimal_k(const nn::Mlp& model, const data::NoisyClassificationDataset& val);

}  // namespace nestco::nested
