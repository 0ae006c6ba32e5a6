#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nestco/config.hpp"
#include "nestco/pipeline.hpp"

namespace nestco::pipeline {

/// One (sigma, seed) run. Per-peer values are averaged over the two peers.
struct AblationCell {
  /// Unset for the plain cross-entropy row.
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  double k_star = 0.0;
  /// Stage-one test accuracy at k*.
  double accuracy = 0.0;
  /// Stage-one test accuracy at full width.
  double accuracy_full = 0.0;
  double coteach_k_star = 0.0;
  /// Ensemble test accuracy after stage two at the peers' fresh k*.
  double coteach_accuracy = 0.0;
};

struct Stat {
  double mean = 0.0;
  /// Sample standard deviation; unset for a single run.
  std::optional<double> std;
};

struct AblationRow {
  std::string label;
  std::optional<double> sigma;
  std::size_t runs = 0;
  Stat k_star;
  Stat accuracy;
  Stat accuracy_full;
  Stat coteach_accuracy;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;
};

Stat summarize(const std::vector<double>& values);

/// Runs the two-stage pipeline for every sigma and seed of config.ablation,
/// plus a row with nested dropout disabled when include_ce is set. Rows come
/// in sigma order with the plain row first.
AblationResult run_ablation(const ExperimentConfig& config, const ClassificationData& data);

/// Seed-specific copy of the configuration used for one ablation cell.
ExperimentConfig ablation_cell_config(const ExperimentConfig& base, std::optional<double> sigma,
                                      std::uint64_t seed);

std::string ablation_csv(const AblationResult& result);
std::string ablation_cells_csv(const AblationResult& result);

}  // namespace nestco::pipeline
