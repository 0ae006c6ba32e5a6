#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "nestco/checkpoint.hpp"
#include "nestco/config.hpp"
#include "nestco/datasets.hpp"
#include "nestco/metrics.hpp"
#include "nestco/mlp.hpp"

namespace nestco::pipeline {

struct ClassificationData {
  data::NoisyClassificationDataset train;
  data::NoisyClassificationDataset val;
  data::NoisyClassificationDataset test;
};

/// Blobs split into train/val/test, then label noise on the training split.
/// Validation and test keep clean labels.
ClassificationData make_classification_data(const DataConfig& config);
void save_classification_data(const ClassificationData& data, const std::filesystem::path& dir);
ClassificationData load_classification_data(const std::filesystem::path& dir);

/// The classifier of ModelConfig. It always registers the nested position in
/// front of the output layer, so any model can be swept over k.
nn::Mlp make_classifier(const ModelConfig& config, std::size_t dim, std::size_t classes,
                        std::uint64_t seed);

/// Seeds of the two stage-one peers: index 0 or 1.
std::uint64_t peer_init_seed(const Stage1Config& config, std::size_t peer);
std::uint64_t peer_train_seed(const Stage1Config& config, std::size_t peer);

/// Resumable stage-one training loop. Each epoch shuffles the training split,
/// walks it in mini-batches (a trailing batch of one sample is dropped) and
/// samples one k per iteration when nested dropout is configured.
class Stage1Trainer {
 public:
  Stage1Trainer(nn::Mlp model, Stage1Config config);
  /// Continues from a checkpoint written by checkpoint().
  Stage1Trainer(const io::Checkpoint& ckpt, Stage1Config config);

  void run_epoch(const ClassificationData& data);
  /// Runs until `epochs` epochs are complete in total.
  void run_until(const ClassificationData& data, std::size_t epochs);

  const nn::Mlp& model() const noexcept { return model_; }
  nn::Mlp& model() noexcept { return model_; }
  const io::TrainingCursor& cursor() const noexcept { return cursor_; }
  const std::vector<EpochRecord>& epochs() const noexcept { return records_; }
  io::Checkpoint checkpoint(const nlohmann::json& config) const;

 private:
  nn::Mlp model_;
  Stage1Config config_;
  nn::SgdState state_;
  io::TrainingCursor cursor_;
  std::optional<nested::KDistribution> dist_;
  std::vector<EpochRecord> records_;
};

/// Trains for cfg.epochs with cfg.seed driving batch order and k draws.
std::pair<nn::Mlp, RunMetrics> train_stage1(nn::Mlp model, const ClassificationData& data,
                                            const Stage1Config& config);

struct Stage2Output {
  nn::Mlp first;
  nn::Mlp second;
  RunMetrics metrics;
};

/// Co-teaching fine-tune of two pretrained peers with a fresh optimizer state.
Stage2Output train_stage2(nn::Mlp first, nn::Mlp second, const ClassificationData& data,
                          const Stage2Config& config);

/// Mean of the two models' softmax outputs, each at its own truncation.
std::vector<double> ensemble_predict(const nn::Mlp& first, const nn::Mlp& second,
                                     const ad::Tensor& x, std::optional<std::size_t> k_first,
                                     std::optional<std::size_t> k_second);
double ensemble_accuracy(const nn::Mlp& first, const nn::Mlp& second,
                         const data::NoisyClassificationDataset& ds,
                         std::optional<std::size_t> k_first, std::optional<std::size_t> k_second);

/// Validation sweep over every k plus test accuracy at each k.
std::vector<KSweepRow> k_sweep(const nn::Mlp& model, const ClassificationData& data);

/// k* from the validation sweep and the test accuracy there.
struct TruncatedScore {
  std::size_t k_star = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_accuracy_full = 0.0;
};
/// A model trained without nested dropout is scored at full width.
TruncatedScore score_model(const nn::Mlp& model, const ClassificationData& data, bool truncate);

struct TwoStageResult {
  nn::Mlp stage1_first;
  nn::Mlp stage1_second;
  RunMetrics stage1_first_metrics;
  RunMetrics stage1_second_metrics;
  Stage2Output stage2;
  TruncatedScore stage1_scores[2];
  TruncatedScore stage2_scores[2];
  /// Ensemble on the test split at each model's fresh k*.
  double ensemble_test_accuracy = 0.0;
  double ensemble_test_accuracy_full = 0.0;
};

/// Stage one for both peers, then stage two.
TwoStageResult run_two_stage(const ExperimentConfig& config, const ClassificationData& data);

/// Stage one of peer 0 only with nested dropout switched off.
std::pair<nn::Mlp, RunMetrics> train_baseline(const ExperimentConfig& config,
                                              const ClassificationData& data);

}  // namespace nestco::pipeline
