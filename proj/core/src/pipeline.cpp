#include "nestco/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "nestco/coteaching.hpp"
#include "nestco/csv_io.hpp"
#include "nestco/error.hpp"
#include "nestco/training.hpp"
#include "nestco/truncation.hpp"

namespace nestco::pipeline {

namespace {

// A batch-norm layer in training mode needs two samples for a variance.
constexpr std::size_t kMinBatch = 2;

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += size) {
    const auto end = std::min(n, start + size);
    if (end - start >= kMinBatch) out.emplace_back(start, end);
  }
  return out;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

template <class T>
std::vector<T> gather(const std::vector<T>& src, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(src[i]);
  return out;
}

void require_data(const ClassificationData& data) {
  if (data.train.size() == 0 || data.val.size() == 0 || data.test.size() == 0) {
    throw ValidationError("training needs non-empty train, val and test splits");
  }
}

void require_same_architecture(const nn::Mlp& a, const nn::Mlp& b) {
  bool same = a.layers().size() == b.layers().size() &&
              a.nested_positions() == b.nested_positions();
  for (std::size_t i = 0; same && i < a.layers().size(); ++i) {
    same = a.layers()[i].index() == b.layers()[i].index() && a.width_after(i) == b.width_after(i);
  }
  if (!same || a.input_dim() != b.input_dim()) {
    throw ValidationError("co-teaching peers must share one architecture");
  }
}

}  // namespace

ClassificationData make_classification_data(const DataConfig& cfg) {
  cfg.validate();
  const auto total = cfg.train_size + cfg.val_size + cfg.test_size;
  auto clean = data::gen_gaussian_blobs(total, cfg.classes, cfg.dim, cfg.separation,
                                        derive_seed(cfg.seed, 0));
  data::SplitSpec spec;
  spec.train = static_cast<double>(cfg.train_size) / static_cast<double>(total);
  spec.val = static_cast<double>(cfg.val_size) / static_cast<double>(total);
  spec.test = 1.0 - spec.train - spec.val;
  spec.seed = derive_seed(cfg.seed, 1);
  auto parts = data::split(clean, spec);
  ClassificationData out{std::move(parts.train), std::move(parts.val), std::move(parts.test)};
  const auto noise_seed = derive_seed(cfg.seed, 2);
  switch (cfg.noise) {
    case NoiseKind::none: break;
    case NoiseKind::symmetric:
      out.train = data::inject_symmetric_noise(std::move(out.train), cfg.noise_rate, noise_seed);
      break;
    case NoiseKind::pairflip:
      out.train = data::inject_pairflip_noise(std::move(out.train), cfg.noise_rate, noise_seed);
      break;
  }
  return out;
}

void save_classification_data(const ClassificationData& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  data::save_csv(d.train, dir / "train.csv");
  data::save_csv(d.val, dir / "val.csv");
  data::save_csv(d.test, dir / "test.csv");
}

ClassificationData load_classification_data(const std::filesystem::path& dir) {
  ClassificationData d{data::load_classification_csv(dir / "train.csv"),
                       data::load_classification_csv(dir / "val.csv"),
                       data::load_classification_csv(dir / "test.csv")};
  if (d.val.dim != d.train.dim || d.test.dim != d.train.dim ||
      d.val.class_count != d.train.class_count || d.test.class_count != d.train.class_count) {
    throw ValidationError(dir.string() + ": splits disagree on dimension or class count");
  }
  return d;
}

nn::Mlp make_classifier(const ModelConfig& cfg, std::size_t dim, std::size_t classes,
                        std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::vector<nn::Layer> layers;
  layers.emplace_back(nn::make_linear(dim, cfg.hidden, rng));
  if (cfg.batchnorm) layers.emplace_back(nn::make_batchnorm(cfg.hidden));
  layers.emplace_back(nn::Relu{});
  layers.emplace_back(nn::make_linear(cfg.hidden, cfg.width, rng));
  if (cfg.batchnorm) layers.emplace_back(nn::make_batchnorm(cfg.width));
  layers.emplace_back(nn::Relu{});
  const auto position = layers.size() - 1;
  layers.emplace_back(nn::make_linear(cfg.width, classes, rng));
  return nn::Mlp(std::move(layers), {position});
}

std::uint64_t peer_init_seed(const Stage1Config& cfg, std::size_t peer) {
  return derive_seed(cfg.seed, 2 * peer);
}

std::uint64_t peer_train_seed(const Stage1Config& cfg, std::size_t peer) {
  return derive_seed(cfg.seed, 2 * peer + 1);
}

// ---------------------------------------------------------------------------
// Stage one

Stage1Trainer::Stage1Trainer(nn::Mlp model, Stage1Config config)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.validate();
  cursor_.rng = Rng(config_.seed);
  if (config_.nested) {
    if (!model_.has_nested() || model_.nested_channels() != config_.nested->channels) {
      throw ValidationError("stage1: nested channels " + std::to_string(config_.nested->channels) +
                            " do not match the model's nested width " +
                            std::to_string(model_.nested_channels()));
    }
    dist_ = nested::k_distribution(*config_.nested);
  }
}

Stage1Trainer::Stage1Trainer(const io::Checkpoint& ckpt, Stage1Config config)
    : Stage1Trainer(ckpt.model, std::move(config)) {
  state_ = ckpt.optimizer;
  cursor_ = ckpt.cursor;
}

void Stage1Trainer::run_epoch(const ClassificationData& data) {
  require_data(data);
  if (data.train.dim != model_.input_dim()) {
    throw DimensionError("stage1: data has " + std::to_string(data.train.dim) +
                         " features, model expects " + std::to_string(model_.input_dim()));
  }
  auto order = iota(data.train.size());
  shuffle(order, cursor_.rng);
  double loss_sum = 0.0;
  double lr = 0.0;
  std::size_t steps = 0;
  for (const auto& [start, end] : batch_ranges(order.size(), config_.batch_size)) {
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    lr = nn::lr_at(config_.sgd.schedule, cursor_.iteration, cursor_.epoch);
    std::optional<std::size_t> k;
    if (dist_) k = dist_->sample(cursor_.rng);
    const auto x = nn::feature_matrix(data.train, idx);
    const auto labels = gather(data.train.noisy_labels, idx);
    try {
      loss_sum += nn::train_step_ce(model_, state_, config_.sgd, lr, x, labels, k);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " (stage 1, epoch " +
                          std::to_string(cursor_.epoch) + ", iteration " +
                          std::to_string(cursor_.iteration) + ")");
    }
    ++cursor_.iteration;
    ++steps;
  }
  EpochRecord r;
  r.epoch = cursor_.epoch;
  r.train_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
  r.lr = lr;
  r.val_accuracy = nn::accuracy(model_, data.val);
  r.test_accuracy = nn::accuracy(model_, data.test);
  records_.push_back(r);
  ++cursor_.epoch;
}

void Stage1Trainer::run_until(const ClassificationData& data, std::size_t epochs) {
  while (cursor_.epoch < epochs) run_epoch(data);
}

io::Checkpoint Stage1Trainer::checkpoint(const nlohmann::json& config) const {
  return io::Checkpoint{model_, state_, cursor_, config};
}

std::pair<nn::Mlp, RunMetrics> train_stage1(nn::Mlp model, const ClassificationData& data,
                                            const Stage1Config& config) {
  RunMetrics metrics;
  metrics.command = "train";
  metrics.seed = config.seed;
  if (config.epochs == 0) return {std::move(model), std::move(metrics)};
  Stage1Trainer trainer(std::move(model), config);
  trainer.run_until(data, config.epochs);
  metrics.epochs = trainer.epochs();
  return {std::move(trainer.model()), std::move(metrics)};
}

// ---------------------------------------------------------------------------
// Stage two

Stage2Output train_stage2(nn::Mlp first, nn::Mlp second, const ClassificationData& data,
                          const Stage2Config& config) {
  Stage2Output out{std::move(first), std::move(second), {}};
  out.metrics.command = "coteach";
  out.metrics.seed = config.seed;
  require_same_architecture(out.first, out.second);
  if (config.epochs == 0) return out;
  config.validate();
  require_data(data);

  std::optional<nested::KDistribution> dist;
  if (config.nested) {
    if (!out.first.has_nested() || out.first.nested_channels() != config.nested->channels) {
      throw ValidationError("stage2: nested channels do not match the models");
    }
    dist = nested::k_distribution(*config.nested);
  }
  if (config.freeze_bn) {
    out.first.freeze_batchnorm();
    out.second.freeze_batchnorm();
  }

  Rng rng(config.seed);
  nn::SgdState state_first;
  nn::SgdState state_second;
  std::size_t iteration = 0;
  const auto& train = data.train;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double keep = coteach::keep_fraction_at(config.coteach, epoch);
    auto order = iota(train.size());
    shuffle(order, rng);
    double loss_first = 0.0;
    double loss_second = 0.0;
    double lr = 0.0;
    std::size_t steps = 0;
    std::size_t kept[2] = {0, 0};
    std::size_t clean[2] = {0, 0};
    for (const auto& [start, end] : batch_ranges(order.size(), config.batch_size)) {
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto labels = gather(train.noisy_labels, idx);
      const auto flags = gather(train.clean_flags, idx);
      coteach::Batch batch{nn::feature_matrix(train, idx), labels, flags};
      coteach::StepOptions opts;
      opts.config = config.coteach;
      opts.keep_fraction = keep;
      opts.sgd = config.sgd;
      opts.lr = lr = nn::lr_at(config.sgd.schedule, iteration, epoch);
      opts.k_dist = dist ? &*dist : nullptr;
      const auto step = coteach::coteach_step(batch, coteach::Peer{out.first, state_first},
                                              coteach::Peer{out.second, state_second}, opts, rng);
      loss_first += step.loss_first;
      loss_second += step.loss_second;
      const coteach::SelectionResult* sel[2] = {&step.by_first, &step.by_second};
      for (int m = 0; m < 2; ++m) {
        kept[m] += sel[m]->kept_count();
        for (auto i : sel[m]->kept_indices) clean[m] += flags[i];
      }
      ++iteration;
      ++steps;
    }
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = steps ? loss_first / static_cast<double>(steps) : 0.0;
    r.train_loss_second = steps ? loss_second / static_cast<double>(steps) : 0.0;
    r.lr = lr;
    r.keep_fraction = keep;
    r.val_accuracy = nn::accuracy(out.first, data.val);
    r.test_accuracy = nn::accuracy(out.first, data.test);
    r.val_accuracy_second = nn::accuracy(out.second, data.val);
    r.test_accuracy_second = nn::accuracy(out.second, data.test);
    r.ensemble_test_accuracy = ensemble_accuracy(out.first, out.second, data.test, {}, {});
    r.kept_first = kept[0];
    r.kept_second = kept[1];
    r.purity_first = kept[0] ? static_cast<double>(clean[0]) / static_cast<double>(kept[0]) : 0.0;
    r.purity_second = kept[1] ? static_cast<double>(clean[1]) / static_cast<double>(kept[1]) : 0.0;
    out.metrics.epochs.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<double> ensemble_predict(const nn::Mlp& first, const nn::Mlp& second,
                                     const ad::Tensor& x, std::optional<std::size_t> k_first,
                                     std::optional<std::size_t> k_second) {
  if (first.output_dim() != second.output_dim() || first.input_dim() != second.input_dim()) {
    throw DimensionError("ensemble: models disagree on input or output width");
  }
  auto p = nn::predict_proba(first, x, k_first);
  const auto q = nn::predict_proba(second, x, k_second);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.5 * (p[i] + q[i]);
  return p;
}

double ensemble_accuracy(const nn::Mlp& first, const nn::Mlp& second,
                         const data::NoisyClassificationDataset& ds,
                         std::optional<std::size_t> k_first, std::optional<std::size_t> k_second) {
  if (ds.size() == 0) throw ContractError("ensemble_accuracy: empty dataset");
  const auto probs = ensemble_predict(first, second, nn::feature_matrix(ds), k_first, k_second);
  const auto predicted = nn::argmax_rows(probs, first.output_dim());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == ds.true_labels[i];
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::vector<KSweepRow> k_sweep(const nn::Mlp& model, const ClassificationData& data) {
  const auto val = nested::find_optimal_k(model, data.val);
  const auto test = nested::find_optimal_k(model, data.test);
  std::vector<KSweepRow> rows;
  for (std::size_t k = 1; k <= val.sweep.size(); ++k) {
    rows.push_back({k, val.sweep[k - 1], test.sweep[k - 1]});
  }
  return rows;
}

TruncatedScore score_model(const nn::Mlp& model, const ClassificationData& data, bool truncate) {
  TruncatedScore s;
  s.test_accuracy_full = nn::accuracy(model, data.test);
  if (truncate && model.has_nested()) {
    const auto search = nested::find_optimal_k(model, data.val);
    s.k_star = search.k_star;
    s.val_accuracy = search.score;
    s.test_accuracy = nested::truncate_eval(model, data.test, s.k_star);
  } else {
    s.k_star = model.has_nested() ? model.nested_channels() : 0;
    s.val_accuracy = nn::accuracy(model, data.val);
    s.test_accuracy = s.test_accuracy_full;
  }
  return s;
}

TwoStageResult run_two_stage(const ExperimentConfig& config, const ClassificationData& data) {
  config.validate();
  require_data(data);
  const auto s1 = config.stage1_config();
  const auto resolved = to_json(config);
  TwoStageResult result;
  nn::Mlp* models[2] = {&result.stage1_first, &result.stage1_second};
  RunMetrics* metrics[2] = {&result.stage1_first_metrics, &result.stage1_second_metrics};
  for (std::size_t p = 0; p < 2; ++p) {
    auto model = make_classifier(config.model, data.train.dim, data.train.class_count,
                                 peer_init_seed(s1, p));
    auto peer_cfg = s1;
    peer_cfg.seed = peer_train_seed(s1, p);
    auto [trained, m] = train_stage1(std::move(model), data, peer_cfg);
    m.config = resolved;
    *models[p] = std::move(trained);
    *metrics[p] = std::move(m);
    result.stage1_scores[p] = score_model(*models[p], data, config.nested_enabled);
  }
  result.stage2 = train_stage2(result.stage1_first, result.stage1_second, data,
                               config.stage2_config());
  result.stage2.metrics.config = resolved;
  result.stage2_scores[0] = score_model(result.stage2.first, data, config.nested_enabled);
  result.stage2_scores[1] = score_model(result.stage2.second, data, config.nested_enabled);
  std::optional<std::size_t> k1;
  std::optional<std::size_t> k2;
  if (config.nested_enabled) {
    k1 = result.stage2_scores[0].k_star;
    k2 = result.stage2_scores[1].k_star;
  }
  result.ensemble_test_accuracy =
      ensemble_accuracy(result.stage2.first, result.stage2.second, data.test, k1, k2);
  result.ensemble_test_accuracy_full =
      ensemble_accuracy(result.stage2.first, result.stage2.second, data.test, {}, {});
  return result;
}

std::pair<nn::Mlp, RunMetrics> train_baseline(const ExperimentConfig& config,
                                              const ClassificationData& data) {
  auto cfg = config;
  cfg.nested_enabled = false;
  const auto s1 = cfg.stage1_config();
  auto model = make_classifier(cfg.model, data.train.dim, data.train.class_count,
                               peer_init_seed(s1, 0));
  auto peer_cfg = s1;
  peer_cfg.seed = peer_train_seed(s1, 0);
  auto out = train_stage1(std::move(model), data, peer_cfg);
  out.second.config = to_json(cfg);
  return out;
}

}  // namespace nestco::pipeline
