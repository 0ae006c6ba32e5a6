#include "nestco/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nestco/error.hpp"

namespace nestco::nn {

namespace {

constexpr std::size_t kEvalChunk = 2048;

}  // namespace

ad::Tensor feature_matrix(const data::NoisyClassificationDataset& ds,
                          std::span<const std::size_t> indices) {
  if (indices.empty()) {
    if (ds.size() == 0) throw ContractError("feature_matrix: empty dataset");
    return ad::Tensor::matrix(ds.size(), ds.dim, ds.features);
  }
  std::vector<double> rows;
  rows.reserve(indices.size() * ds.dim);
  for (auto i : indices) {
    const auto r = ds.row(i);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return ad::Tensor::matrix(indices.size(), ds.dim, std::move(rows));
}

double train_step_ce(Mlp& model, SgdState& state, const SgdConfig& config, double lr,
                     const ad::Tensor& x, std::span<const int> labels,
                     std::optional<std::size_t> mask_k) {
  ad::Tape tape;
  const auto binding = model.bind(true);
  ForwardOptions opts;
  opts.mask_k = mask_k;
  opts.training = true;
  const auto logits = model.forward(tape, x, opts, binding);
  const auto loss = ad::mean(tape, ad::softmax_cross_entropy(tape, logits, labels));
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite training loss (" + std::to_string(value) + ") at lr " +
                        std::to_string(lr));
  }
  tape.backward(loss);
  const auto params = model.parameters();
  const auto grads = binding.grads();
  sgd_step(params, grads, state, config, lr);
  return value;
}

std::vector<double> per_sample_losses(const Mlp& model, const ad::Tensor& x,
                                      std::span<const int> labels,
                                      std::optional<std::size_t> mask_k) {
  const auto logits = model.infer(x, mask_k);
  ad::Tape tape;
  const auto losses = ad::softmax_cross_entropy(tape, logits, labels);
  return {losses.values().begin(), losses.values().end()};
}

std::vector<double> predict_proba(const Mlp& model, const ad::Tensor& x,
                                  std::optional<std::size_t> mask_k) {
  const auto logits = model.infer(x, mask_k);
  return ad::softmax_rows(logits.values(), model.output_dim());
}

std::vector<int> argmax_rows(std::span<const double> scores, std::size_t cols) {
  std::vector<int> out(scores.size() / cols);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto* row = scores.data() + r * cols;
    out[r] = static_cast<int>(std::max_element(row, row + cols) - row);
  }
  return out;
}

double accuracy(const Mlp& model, const data::NoisyClassificationDataset& ds,
                std::optional<std::size_t> mask_k) {
  if (ds.size() == 0) throw ContractError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += kEvalChunk) {
    const auto count = std::min(kEvalChunk, ds.size() - start);
    std::vector<double> rows(ds.features.begin() + static_cast<std::ptrdiff_t>(start * ds.dim),
                             ds.features.begin() +
                                 static_cast<std::ptrdiff_t>((start + count) * ds.dim));
    const auto logits = model.infer(ad::Tensor::matrix(count, ds.dim, std::move(rows)), mask_k);
    const auto predicted = argmax_rows(logits.values(), model.output_dim());
    for (std::size_t i = 0; i < count; ++i) {
      if (predicted[i] == ds.true_labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace nestco::nn
