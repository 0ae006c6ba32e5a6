#include "nestco/truncation.hpp"

#include "nestco/error.hpp"
#include "nestco/nested_dropout.hpp"
#include "nestco/training.hpp"

namespace nestco::nested {

namespace {

void require_nested(const nn::Mlp& model) {
  if (!model.has_nested()) {
    throw ValidationError("truncated evaluation needs a model with a nested-dropout position");
  }
}

}  // namespace

double truncate_eval(const nn::Mlp& model, const data::NoisyClassificationDataset& ds,
                     std::size_t k) {
  require_nested(model);
  if (ds.size() == 0) throw ContractError("truncate_eval: empty dataset");
  return nn::accuracy(model, ds, k);
}

double truncate_eval(const nn::Mlp& model, const std::vector<double>& x,
                     const std::vector<double>& targets, std::size_t k) {
  require_nested(model);
  if (x.empty()) throw ContractError("truncate_eval: empty dataset");
  if (x.size() != targets.size()) throw DimensionError("truncate_eval: x and targets differ in length");
  const auto pred = model.infer(ad::Tensor::matrix(x.size(), 1, x), k);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = pred.values()[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(x.size());
}

KSearchResult find_optimal_k(const nn::Mlp& model, const data::NoisyClassificationDataset& val) {
  require_nested(model);
  if (val.size() == 0) throw ContractError("find_optimal_k: empty validation set");
  KSearchResult result;
  const auto channels = model.nested_channels();
  result.sweep.reserve(channels);

  // With a single mask position the layers before it do not depend on k, so
  // their output is computed once and only the tail is re-run per k.
  const bool single = model.nested_positions().size() == 1;
  const auto split_at = *model.nested_positions().begin() + 1;
  const auto last = model.layers().size();
  ad::Tensor head;
  if (single) head = model.infer_layers(nn::feature_matrix(val), 0, split_at);
  const auto classes = model.output_dim();

  for (std::size_t k = 1; k <= channels; ++k) {
    double acc = 0.0;
    if (single) {
      ad::Tape tape;
      const auto masked = apply_nested_mask(tape, head, k);
      const auto logits = model.infer_layers(masked, split_at, last);
      const auto predicted = nn::argmax_rows(logits.values(), classes);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == val.true_labels[i]) ++correct;
      }
      acc = static_cast<double>(correct) / static_cast<double>(val.size());
    } else {
      acc = truncate_eval(model, val, k);
    }
    result.sweep.push_back(acc);
    if (result.k_star == 0 || acc > result.score) {
      result.k_star = k;
      result.score = acc;
    }
  }
  return result;
}

}  // namespace nestco::nested
