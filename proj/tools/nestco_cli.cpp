// nestco command-line driver.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nestco/ablation.hpp"
#include "nestco/checkpoint.hpp"
#include "nestco/config.hpp"
#include "nestco/csv_io.hpp"
#include "nestco/error.hpp"
#include "nestco/metrics.hpp"
#include "nestco/pipeline.hpp"
#include "nestco/toy.hpp"
#include "nestco/training.hpp"
#include "nestco/truncation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nestco;
using namespace nestco::pipeline;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("-c,--config", c.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", c.overrides, "Override a config key, e.g. --set stage1.lr=0.01")
      ->take_all();
  if (with_out) cmd->add_option("-o,--out", c.out, "Output directory");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  return cfg;
}

ClassificationData data_for(const ExperimentConfig& cfg, const std::string& dir) {
  return dir.empty() ? make_classification_data(cfg.data) : load_classification_data(dir);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json score_json(const TruncatedScore& s) {
  return {{"k_star", s.k_star},
          {"val_accuracy_at_k_star", s.val_accuracy},
          {"test_accuracy_at_k_star", s.test_accuracy},
          {"test_accuracy_full", s.test_accuracy_full}};
}

std::string ckpt_name(std::size_t peer) { return "model" + std::to_string(peer + 1) + ".ckpt.json"; }

// ---------------------------------------------------------------------------

int cmd_gen_data(const Common& c, const std::string& kind) {
  auto cfg = resolve(c);
  if (c.seed) cfg.data.seed = cfg.toy.seed = *c.seed;
  fs::create_directories(c.out);
  if (kind == "toy") {
    cfg.toy.validate();
    const auto ds = data::gen_toy_regression(cfg.toy.points, cfg.toy.lo, cfg.toy.hi,
                                             cfg.toy.noise_std, derive_seed(cfg.toy.seed, 0));
    data::save_csv(ds, fs::path(c.out) / "toy.csv");
    std::printf("wrote %zu points to %s\n", ds.size(), (fs::path(c.out) / "toy.csv").c_str());
    return 0;
  }
  const auto d = make_classification_data(cfg.data);
  save_classification_data(d, c.out);
  std::printf("wrote train/val/test (%zu/%zu/%zu rows, train noise %.4f) to %s\n", d.train.size(),
              d.val.size(), d.test.size(), d.train.noise_rate(), c.out.c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& data_dir, const std::string& resume,
              std::size_t peers) {
  auto cfg = resolve(c);
  if (c.seed) cfg.stage1.seed = *c.seed;
  cfg.validate();
  const auto data = data_for(cfg, data_dir);
  const auto s1 = cfg.stage1_config();
  const auto resolved = to_json(cfg);
  fs::create_directories(c.out);
  for (std::size_t p = 0; p < peers; ++p) {
    Stopwatch clock;
    auto peer_cfg = s1;
    peer_cfg.seed = peer_train_seed(s1, p);
    std::optional<Stage1Trainer> trainer;
    if (resume.empty()) {
      trainer.emplace(make_classifier(cfg.model, data.train.dim, data.train.class_count,
                                      peer_init_seed(s1, p)),
                      peer_cfg);
    } else {
      trainer.emplace(io::load_checkpoint(fs::path(resume) / ckpt_name(p)), peer_cfg);
    }
    const auto first_epoch = trainer->cursor().epoch;
    trainer->run_until(data, s1.epochs);
    io::save_checkpoint(trainer->checkpoint(resolved), fs::path(c.out) / ckpt_name(p));

    RunMetrics m;
    m.command = "train";
    m.seed = s1.seed;
    m.config = resolved;
    m.epochs = trainer->epochs();
    for (auto& e : m.epochs) e.epoch -= first_epoch;
    const auto score = score_model(trainer->model(), data, s1.nested.has_value());
    m.summary = {{"peer", p + 1},
                 {"init_seed", peer_init_seed(s1, p)},
                 {"train_seed", peer_cfg.seed},
                 {"first_epoch", first_epoch},
                 {"epochs_completed", trainer->cursor().epoch},
                 {"score", score_json(score)}};
    m.wall_clock_seconds = clock.seconds();
    write_metrics(m, c.out, "train_model" + std::to_string(p + 1));
    std::printf("model %zu: test accuracy %.4f full width, %.4f at k*=%zu\n", p + 1,
                score.test_accuracy_full, score.test_accuracy, score.k_star);
  }
  return 0;
}

int cmd_coteach(const Common& c, const std::string& data_dir, const std::string& m1,
                const std::string& m2) {
  Stopwatch clock;
  auto cfg = resolve(c);
  if (c.seed) cfg.stage2.seed = *c.seed;
  cfg.validate();
  const auto data = data_for(cfg, data_dir);
  const auto first = io::load_checkpoint(m1);
  const auto second = io::load_checkpoint(m2);
  auto s2 = cfg.stage2_config();
  auto out = train_stage2(first.model, second.model, data, s2);
  const auto resolved = to_json(cfg);
  fs::create_directories(c.out);
  io::save_checkpoint(io::Checkpoint{out.first, {}, {}, resolved}, fs::path(c.out) / "final1.ckpt.json");
  io::save_checkpoint(io::Checkpoint{out.second, {}, {}, resolved}, fs::path(c.out) / "final2.ckpt.json");

  const bool truncate = s2.nested.has_value();
  const auto a = score_model(out.first, data, truncate);
  const auto b = score_model(out.second, data, truncate);
  std::optional<std::size_t> k1, k2;
  if (truncate) k1 = a.k_star, k2 = b.k_star;
  const double ens = ensemble_accuracy(out.first, out.second, data.test, k1, k2);
  auto& m = out.metrics;
  m.config = resolved;
  m.summary = {{"model1", score_json(a)},
               {"model2", score_json(b)},
               {"ensemble_test_accuracy", ens},
               {"ensemble_test_accuracy_full",
                ensemble_accuracy(out.first, out.second, data.test, {}, {})}};
  m.wall_clock_seconds = clock.seconds();
  write_metrics(m, c.out, "coteach");
  std::printf("ensemble test accuracy %.4f\n", ens);
  return 0;
}

int cmd_eval(const Common& c, const std::string& data_dir, const std::string& model_path,
             const std::string& model2_path, std::optional<std::size_t> k, bool k_star) {
  auto cfg = resolve(c);
  if (k && *k == 0) throw ValidationError("--k must be >= 1");
  const auto data = data_for(cfg, data_dir);
  const auto model = io::load_checkpoint(model_path).model;
  if (k && (!model.has_nested() || *k > model.nested_channels())) {
    throw ValidationError("--k " + std::to_string(*k) + " outside [1, " +
                          std::to_string(model.nested_channels()) + "]");
  }
  RunMetrics m;
  m.command = "eval";
  m.seed = cfg.data.seed;
  m.config = to_json(cfg);
  json s = {{"model", model_path},
            {"test_accuracy_full", nn::accuracy(model, data.test)},
            {"val_accuracy_full", nn::accuracy(model, data.val)}};
  if (k) s["test_accuracy_at_k"] = {{"k", *k}, {"accuracy", nn::accuracy(model, data.test, k)}};
  std::optional<std::size_t> k1 = k;
  if (k_star) {
    const auto score = score_model(model, data, true);
    s["k_star"] = score_json(score);
    k1 = score.k_star;
  }
  if (!model2_path.empty()) {
    const auto model2 = io::load_checkpoint(model2_path).model;
    std::optional<std::size_t> k2 = k;
    if (k_star) k2 = score_model(model2, data, true).k_star;
    s["model2"] = model2_path;
    s["ensemble_test_accuracy"] = ensemble_accuracy(model, model2, data.test, k1, k2);
    s["ensemble_test_accuracy_full"] = ensemble_accuracy(model, model2, data.test, {}, {});
  }
  m.summary = s;
  write_metrics(m, c.out, "eval");
  std::cout << s.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const Common& c, const std::string& data_dir, const std::string& model_path) {
  Stopwatch clock;
  auto cfg = resolve(c);
  const auto data = data_for(cfg, data_dir);
  const auto model = io::load_checkpoint(model_path).model;
  RunMetrics m;
  m.command = "sweep-k";
  m.seed = cfg.data.seed;
  m.config = to_json(cfg);
  m.k_sweep = k_sweep(model, data);
  const auto score = score_model(model, data, true);
  m.summary = {{"model", model_path}, {"score", score_json(score)}};
  m.wall_clock_seconds = clock.seconds();
  write_metrics(m, c.out, "sweep_k");
  std::printf("k* = %zu (val %.4f), test %.4f at k*, %.4f at full width\n", score.k_star,
              score.val_accuracy, score.test_accuracy, score.test_accuracy_full);
  return 0;
}

int cmd_toy(const Common& c, std::optional<std::size_t> epochs) {
  Stopwatch clock;
  auto cfg = resolve(c);
  if (c.seed) cfg.toy.seed = *c.seed;
  if (epochs) cfg.toy.epochs = *epochs;
  cfg.toy.validate();
  const auto result = run_toy_experiment(cfg.toy);
  fs::create_directories(c.out);
  const fs::path out(c.out);
  io::write_text(out / "toy_predictions.csv", toy_table_csv(result));
  io::write_text(out / "toy.svg", toy_plot_svg(result));
  RunMetrics m;
  m.command = "toy";
  m.seed = cfg.toy.seed;
  m.config = to_json(cfg);
  json curves = json::array();
  for (const auto& curve : result.curves) {
    json j = {{"name", curve.name},
              {"mse_to_truth", curve.mse_to_truth},
              {"mse_to_noisy", curve.mse_to_noisy}};
    if (curve.k) j["k"] = *curve.k;
    curves.push_back(j);
  }
  m.summary = {{"curves", curves},
               {"final_loss_plain", result.final_loss_plain},
               {"final_loss_nested", result.final_loss_nested}};
  m.wall_clock_seconds = clock.seconds();
  write_metrics(m, out, "toy");
  for (const auto& curve : result.curves) {
    std::printf("%-12s mse to truth %.4f  mse to noisy %.4f\n", curve.name.c_str(),
                curve.mse_to_truth, curve.mse_to_noisy);
  }
  return 0;
}

int cmd_ablate(const Common& c, const std::string& data_dir) {
  Stopwatch clock;
  auto cfg = resolve(c);
  cfg.validate();
  const auto data = data_for(cfg, data_dir);
  const auto result = run_ablation(cfg, data);
  fs::create_directories(c.out);
  const fs::path out(c.out);
  io::write_text(out / "ablation.csv", ablation_csv(result));
  io::write_text(out / "ablation_cells.csv", ablation_cells_csv(result));
  RunMetrics m;
  m.command = "ablate";
  m.seed = cfg.stage1.seed;
  m.config = to_json(cfg);
  json rows = json::array();
  auto stat = [](const Stat& s) {
    json j = {{"mean", s.mean}};
    if (s.std) j["std"] = *s.std;
    return j;
  };
  for (const auto& r : result.rows) {
    json j = {{"label", r.label},
              {"runs", r.runs},
              {"k_star", stat(r.k_star)},
              {"accuracy", stat(r.accuracy)},
              {"accuracy_full", stat(r.accuracy_full)},
              {"coteach_accuracy", stat(r.coteach_accuracy)}};
    if (r.sigma) j["sigma"] = *r.sigma;
    rows.push_back(j);
  }
  m.summary = {{"rows", rows}};
  m.wall_clock_seconds = clock.seconds();
  write_metrics(m, out, "ablation");
  std::fputs(ablation_csv(result).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested dropout and co-teaching experiments on synthetic data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nestco 0.1.0");

  Common common;
  std::string data_dir, resume, model1, model2, kind = "classification";
  std::size_t peers = 2;
  std::optional<std::size_t> k, epochs;
  bool k_star = false;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  add_common(gen, common);
  gen->add_option("--seed", common.seed, "Dataset seed");
  gen->add_option("--kind", kind, "classification or toy")
      ->check(CLI::IsMember({"classification", "toy"}));

  auto* train = app.add_subcommand("train", "Stage one: train two peers separately");
  add_common(train, common);
  train->add_option("--seed", common.seed, "Stage-one seed");
  train->add_option("--data", data_dir, "Directory with train/val/test CSV (default: generate)")
      ->check(CLI::ExistingDirectory);
  train->add_option("--resume", resume, "Continue from the checkpoints in this directory")
      ->check(CLI::ExistingDirectory);
  train->add_option("--peers", peers, "Number of peers to train")->check(CLI::Range(1, 2));

  auto* co = app.add_subcommand("coteach", "Stage two: co-teaching fine-tune of two checkpoints");
  add_common(co, common);
  co->add_option("--seed", common.seed, "Stage-two seed");
  co->add_option("--data", data_dir, "Directory with train/val/test CSV")
      ->check(CLI::ExistingDirectory);
  co->add_option("--model1", model1, "First checkpoint")->required()->check(CLI::ExistingFile);
  co->add_option("--model2", model2, "Second checkpoint")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "Accuracy of a checkpoint, optionally truncated");
  add_common(ev, common);
  ev->add_option("--data", data_dir, "Directory with train/val/test CSV")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--model", model1, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--model2", model2, "Second checkpoint for ensembling")
      ->check(CLI::ExistingFile);
  ev->add_option("--k", k, "Evaluate with the first k channels");
  ev->add_flag("--k-star", k_star, "Also evaluate at the validated k*");

  auto* sweep = app.add_subcommand("sweep-k", "Accuracy for every truncation depth");
  add_common(sweep, common);
  sweep->add_option("--data", data_dir, "Directory with train/val/test CSV")
      ->check(CLI::ExistingDirectory);
  sweep->add_option("--model", model1, "Checkpoint")->required()->check(CLI::ExistingFile);

  auto* toy = app.add_subcommand("toy", "Noisy 1-d regression with and without nested dropout");
  add_common(toy, common);
  toy->add_option("--seed", common.seed, "Experiment seed");
  toy->add_option("--epochs", epochs, "Training epochs (full batch)");

  auto* ablate = app.add_subcommand("ablate", "Sweep sigma over several seeds");
  add_common(ablate, common);
  ablate->add_option("--data", data_dir, "Directory with train/val/test CSV")
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_data(common, kind);
    if (*train) return cmd_train(common, data_dir, resume, peers);
    if (*co) return cmd_coteach(common, data_dir, model1, model2);
    if (*ev) return cmd_eval(common, data_dir, model1, model2, k, k_star);
    if (*sweep) return cmd_sweep(common, data_dir, model1);
    if (*toy) return cmd_toy(common, epochs);
    if (*ablate) return cmd_ablate(common, data_dir);
  } catch (const nestco::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
