#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nestco/mlp.hpp"
#include "nestco/nested_dropout.hpp"
#include "nestco/optim.hpp"
#include "nestco/random.hpp"

namespace nestco::coteach {

enum class ForgetSchedule { fixed, gradual };
/// How the loss-ranking pass treats the nested mask.
enum class SelectionForward { full_channels, sampled_mask };

struct CoteachConfig {
  double lambda_forget = 0.3;
  ForgetSchedule schedule = ForgetSchedule::fixed;
  /// Epoch N at which the gradual schedule reaches 1 - lambda_forget.
  std::size_t gradual_epochs = 10;
  SelectionForward selection_forward = SelectionForward::full_channels;

  void validate() const;
};

/// Fraction of each batch kept: 1 - lambda_forget (fixed) or
/// 1 - lambda_forget * min(epoch / N, 1) (gradual).
double keep_fraction_at(const CoteachConfig& config, std::size_t epoch);

struct SelectionResult {
  /// Ascending batch positions of the kept samples.
  std::vector<std::size_t> kept_indices;
  std::optional<double> purity;

  std::size_t kept_count() const noexcept { return kept_indices.size(); }
};

/// Number of samples kept from a batch of n: max(1, floor(keep_fraction * n)).
std::size_t kept_count_for(std::size_t n, double keep_fraction);

/// Keeps the kept_count_for(n, keep_fraction) smallest losses; ties go to the
/// smaller index.
SelectionResult select_small_loss(std::span<const double> losses, double keep_fraction);

/// |kept and clean| / |kept|; 0 for an empty selection.
double selection_purity(const SelectionResult& result, std::span<const std::uint8_t> clean_flags);

/// One network of a co-teaching pair together with its optimizer state.
struct Peer {
  nn::Mlp& model;
  nn::SgdState& state;
};

/// A mini-batch: [n x dim] features, observed labels and optional clean flags.
struct Batch {
  ad::Tensor features;
  std::span<const int> labels;
  std::span<const std::uint8_t> clean_flags;
};

struct StepOptions {
  CoteachConfig config;
  double keep_fraction = 1.0;
  nn::SgdConfig sgd;
  double lr = 0.0;
  /// Nested-mask distribution; null trains and selects without masking.
  const nested::KDistribution* k_dist = nullptr;
};

struct StepResult {
  /// Samples chosen by model 1 (these train model 2) and by model 2.
  SelectionResult by_first;
  SelectionResult by_second;
  double loss_first = 0.0;
  double loss_second = 0.0;
};

/// Ranks the batch with both models, then updates each model on the samples
/// its peer selected.
///
/// Random draws happen in a fixed order: selection masks (model 1, model 2)
/// when selection uses sampled masks, then update masks (model 1, model 2).
StepResult coteach_step(const Batch& batch, Peer first, Peer second, const StepOptions& opts,
                        Rng& rng);

}  // namespace nestco::coteach
