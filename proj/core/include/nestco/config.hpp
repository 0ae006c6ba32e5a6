#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nestco/coteaching.hpp"
#include "nestco/nested_dropout.hpp"
#include "nestco/optim.hpp"
#include "nestco/toy.hpp"

namespace nestco::pipeline {

enum class NoiseKind { none, symmetric, pairflip };

struct DataConfig {
  std::size_t train_size = 10000;
  std::size_t val_size = 2000;
  std::size_t test_size = 2000;
  std::size_t classes = 10;
  std::size_t dim = 32;
  double separation = 5.0;
  NoiseKind noise = NoiseKind::symmetric;
  double noise_rate = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear(dim, hidden) [BN] ReLU Linear(hidden, width) [BN] ReLU | Linear(width, classes).
/// The bar marks the nested position.
struct ModelConfig {
  std::size_t hidden = 256;
  std::size_t width = 128;
  bool batchnorm = true;

  void validate() const;
};

struct Stage1Config {
  std::optional<nested::NestedConfig> nested;
  nn::SgdConfig sgd;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Stage2Config {
  coteach::CoteachConfig coteach;
  /// warmup_iters must stay 0.
  nn::SgdConfig sgd;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  bool freeze_bn = true;
  /// Masking used by the update passes; unset trains at full width.
  std::optional<nested::NestedConfig> nested;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AblationConfig {
  std::vector<double> sigmas = {25, 50, 100, 150, 250};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  bool include_ce = true;

  void validate() const;
};

/// Everything a command can be configured with. Sections of the INI file map
/// onto the members: [data], [model], [nested], [stage1], [stage2], [toy],
/// [ablation].
struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  bool nested_enabled = true;
  double sigma_nest = 200.0;
  Stage1Config stage1;
  Stage2Config stage2;
  ToyConfig toy;
  AblationConfig ablation;

  ExperimentConfig();

  /// Stage-1 settings with the [nested] section folded in.
  Stage1Config stage1_config() const;
  Stage2Config stage2_config() const;
  std::optional<nested::NestedConfig> nested_config() const;
  void validate() const;
};

/// Sets one field from its dotted key, e.g. "stage1.lr" = "0.02".
/// Unknown keys and unparsable values raise ValidationError.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Accepts "key=value".
void apply_override(ExperimentConfig& config, const std::string& assignment);
std::vector<std::string> config_keys();

/// Parses an INI file onto the defaults and validates the result.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// Resolved values, one object per section.
nlohmann::json to_json(const ExperimentConfig& config);
std::string to_ini(const ExperimentConfig& config);

}  // namespace nestco::pipeline
