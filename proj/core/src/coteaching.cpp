#include "nestco/coteaching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nestco/error.hpp"
#include "nestco/training.hpp"

namespace nestco::coteach {

void CoteachConfig::validate() const {
  if (!(lambda_forget >= 0.0 && lambda_forget < 1.0)) {
    throw ValidationError("forget rate must lie in [0, 1), got " + std::to_string(lambda_forget));
  }
  if (schedule == ForgetSchedule::gradual && gradual_epochs < 1) {
    throw ValidationError("gradual forget schedule needs N >= 1");
  }
}

double keep_fraction_at(const CoteachConfig& config, std::size_t epoch) {
  if (config.schedule == ForgetSchedule::fixed) return 1.0 - config.lambda_forget;
  const double progress = std::min(
      static_cast<double>(epoch) / static_cast<double>(config.gradual_epochs), 1.0);
  return 1.0 - config.lambda_forget * progress;
}

std::size_t kept_count_for(std::size_t n, double keep_fraction) {
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
  const auto m = static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(m, 1, n);
}

SelectionResult select_small_loss(std::span<const double> losses, double keep_fraction) {
  if (losses.empty()) throw ContractError("select_small_loss: empty batch");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ValidationError("keep fraction must lie in (0, 1], got " + std::to_string(keep_fraction));
  }
  const auto m = kept_count_for(losses.size(), keep_fraction);
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto by_loss = [&](std::size_t a, std::size_t b) {
    return losses[a] != losses[b] ? losses[a] < losses[b] : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    by_loss);
  order.resize(m);
  std::sort(order.begin(), order.end());
  return SelectionResult{std::move(order), std::nullopt};
}

double selection_purity(const SelectionResult& result, std::span<const std::uint8_t> clean_flags) {
  if (result.kept_indices.empty()) return 0.0;
  std::size_t clean = 0;
  for (auto i : result.kept_indices) {
    if (i >= clean_flags.size()) throw DimensionError("selection_purity: flags do not cover batch");
    clean += clean_flags[i] != 0 ? 1 : 0;
  }
  return static_cast<double>(clean) / static_cast<double>(result.kept_indices.size());
}

namespace {

std::optional<std::size_t> draw(const nested::KDistribution* dist, Rng& rng) {
  if (dist == nullptr) return std::nullopt;
  return dist->sample(rng);
}

ad::Tensor gather_rows(const ad::Tensor& x, std::span<const std::size_t> rows) {
  const auto cols = x.shape()[1];
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (auto r : rows) {
    const auto src = x.values().subspan(r * cols, cols);
    out.insert(out.end(), src.begin(), src.end());
  }
  return ad::Tensor::matrix(rows.size(), cols, std::move(out));
}

double update_on(Peer peer, const Batch& batch, std::span<const std::size_t> rows,
                 const StepOptions& opts, std::optional<std::size_t> mask_k) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (auto r : rows) labels.push_back(batch.labels[r]);
  const bool whole = rows.size() == batch.labels.size();
  const auto x = whole ? batch.features : gather_rows(batch.features, rows);
  return nn::train_step_ce(peer.model, peer.state, opts.sgd, opts.lr, x, labels, mask_k);
}

}  // namespace

StepResult coteach_step(const Batch& batch, Peer first, Peer second, const StepOptions& opts,
                        Rng& rng) {
  if (batch.features.rank() != 2 || batch.features.shape()[0] != batch.labels.size()) {
    throw DimensionError("coteach_step: features and labels disagree on batch size");
  }
  const bool sampled_selection =
      opts.config.selection_forward == SelectionForward::sampled_mask && opts.k_dist != nullptr;
  const auto select_k1 = sampled_selection ? draw(opts.k_dist, rng) : std::nullopt;
  const auto select_k2 = sampled_selection ? draw(opts.k_dist, rng) : std::nullopt;

  const auto losses1 = nn::per_sample_losses(first.model, batch.features, batch.labels, select_k1);
  const auto losses2 = nn::per_sample_losses(second.model, batch.features, batch.labels, select_k2);

  StepResult result;
  result.by_first = select_small_loss(losses1, opts.keep_fraction);
  result.by_second = select_small_loss(losses2, opts.keep_fraction);
  if (!batch.clean_flags.empty()) {
    result.by_first.purity = selection_purity(result.by_first, batch.clean_flags);
    result.by_second.purity = selection_purity(result.by_second, batch.clean_flags);
  }

  const auto update_k1 = draw(opts.k_dist, rng);
  const auto update_k2 = draw(opts.k_dist, rng);
  result.loss_first = update_on(first, batch, result.by_second.kept_indices, opts, update_k1);
  result.loss_second = update_on(second, batch, result.by_first.kept_indices, opts, update_k2);
  return result;
}

}  // namespace nestco::coteach
