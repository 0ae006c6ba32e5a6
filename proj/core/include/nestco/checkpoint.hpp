#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nestco/mlp.hpp"
#include "nestco/optim.hpp"
#include "nestco/random.hpp"

namespace nestco::io {

/// Where a training run stands: completed epochs, global iteration count and
/// the generator state to continue from.
struct TrainingCursor {
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  Rng rng;
  bool operator==(const TrainingCursor&) const = default;
};

/// Everything needed to resume or evaluate a run.
struct Checkpoint {
  nn::Mlp model;
  nn::SgdState optimizer;
  TrainingCursor cursor;
  /// Resolved configuration of the run that produced the model.
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json to_json(const nn::Mlp& model);
nn::Mlp mlp_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const nn::SgdState& state);
nn::SgdState sgd_state_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

/// JSON text. Doubles are written in shortest round-trip form, so a
/// save/load cycle reproduces every bit.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes text to a file, throwing Error on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace nestco::io
