#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nestco::pipeline {

struct EpochRecord {
  std::size_t epoch = 0;
  /// Mean training loss over the epoch's iterations (first model in stage two).
  double train_loss = 0.0;
  /// Learning rate of the epoch's last iteration.
  double lr = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;

  // Stage two only.
  std::optional<double> train_loss_second;
  std::optional<double> val_accuracy_second;
  std::optional<double> test_accuracy_second;
  std::optional<double> ensemble_test_accuracy;
  std::optional<double> keep_fraction;
  /// Clean fraction of the samples each model selected for its peer.
  std::optional<double> purity_first;
  std::optional<double> purity_second;
  std::optional<std::size_t> kept_first;
  std::optional<std::size_t> kept_second;

  bool operator==(const EpochRecord&) const = default;
};

struct KSweepRow {
  std::size_t k = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool operator==(const KSweepRow&) const = default;
};

/// Everything a command reports. The wall-clock time is kept apart from the
/// rest so that the metrics document of a seeded run is reproducible byte for
/// byte; write_metrics() puts it in a separate timing file.
struct RunMetrics {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<EpochRecord> epochs;
  std::vector<KSweepRow> k_sweep;
  nlohmann::json summary = nlohmann::json::object();
  double wall_clock_seconds = 0.0;

  /// Throws ContractError unless epochs are numbered 0, 1, 2, ...
  void check_contiguous() const;
};

nlohmann::json to_json(const EpochRecord& record);
/// Without the wall-clock time.
nlohmann::json to_json(const RunMetrics& metrics);
RunMetrics metrics_from_json(const nlohmann::json& doc);

std::string epochs_csv(const RunMetrics& metrics);
std::string k_sweep_csv(const std::vector<KSweepRow>& rows);

/// Writes <stem>.json, <stem>_epochs.csv (when there are epochs),
/// <stem>_k_sweep.csv (when there is a sweep) and <stem>_timing.json.
void write_metrics(const RunMetrics& metrics, const std::filesystem::path& dir,
                   const std::string& stem);

/// Shortest decimal text that reads back as the same double.
std::string format_double(double value);

}  // namespace nestco::pipeline
