#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "nestco/checkpoint.hpp"
#include "nestco/config.hpp"
#include "nestco/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nestco;

namespace {

const char* kSmallConfig =
    "[data]\ntrain_size = 300\nval_size = 80\ntest_size = 80\nclasses = 3\ndim = 5\n"
    "separation = 4\nseed = 2\n"
    "[model]\nhidden = 16\nwidth = 8\n"
    "[nested]\nsigma = 4\n"
    "[stage1]\nepochs = 2\nbatch_size = 32\nwarmup_iters = 5\n"
    "[stage2]\nepochs = 2\nbatch_size = 32\n";

fs::path work_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "nestco_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path small_config_file() {
  auto dir = fs::temp_directory_path() / "nestco_cli_test";
  fs::create_directories(dir);
  auto path = dir / "small.ini";
  io::write_text(path, kSmallConfig);
  return path;
}

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(NESTCO_CLI) + " " + args;
  cmd += log.empty() ? " > /dev/null 2>&1" : " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, ToySmoke) {
  auto out = work_dir("toy");
  ASSERT_EQ(run("toy --seed 0 --epochs 200 --out " + q(out)), 0);
  for (auto f : {"toy.json", "toy_timing.json", "toy_predictions.csv", "toy.svg"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto svg = io::read_text(out / "toy.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  const auto doc = nlohmann::json::parse(io::read_text(out / "toy.json"));
  EXPECT_EQ(doc["config"]["toy"]["epochs"], 200);
  EXPECT_EQ(doc["summary"]["curves"].size(), 4u);
}

TEST(Cli, EvalRejectsZeroK) {
  auto out = work_dir("evalk");
  const auto cfg = small_config_file();
  ASSERT_EQ(run("train -c " + q(cfg) + " --peers 1 --out " + q(out)), 0);
  const auto log = out / "log.txt";
  EXPECT_NE(run("eval -c " + q(cfg) + " --model " + q(out / "model1.ckpt.json") + " --k 0 --out " +
                    q(out),
                log),
            0);
  EXPECT_NE(io::read_text(log).find("error:"), std::string::npos);
  EXPECT_EQ(run("eval -c " + q(cfg) + " --model " + q(out / "model1.ckpt.json") +
                " --k 3 --k-star --out " + q(out)),
            0);
}

TEST(Cli, UnknownConfigKeyFails) {
  auto out = work_dir("badkey");
  EXPECT_NE(run("toy --set toy.bogus=1 --out " + q(out)), 0);
  EXPECT_NE(run("frobnicate"), 0);
}

TEST(Cli, RepeatedRunsAreBitwiseIdentical) {
  const auto cfg = small_config_file();
  auto a = work_dir("rep_a"), b = work_dir("rep_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(run("train -c " + q(cfg) + " --seed 5 --out " + q(dir)), 0);
    ASSERT_EQ(run("coteach -c " + q(cfg) + " --seed 6 --model1 " + q(dir / "model1.ckpt.json") +
                  " --model2 " + q(dir / "model2.ckpt.json") + " --out " + q(dir)),
              0);
  }
  for (auto f : {"model1.ckpt.json", "model2.ckpt.json", "train_model1.json", "train_model2.json",
                 "train_model1_epochs.csv", "final1.ckpt.json", "final2.ckpt.json", "coteach.json",
                 "coteach_epochs.csv"})
    EXPECT_EQ(io::read_text(a / f), io::read_text(b / f)) << f;
}

TEST(Cli, TrainThenCoteachMatchesFusedRun) {
  const auto cfg_path = small_config_file();
  auto out = work_dir("fused");
  ASSERT_EQ(run("gen-data -c " + q(cfg_path) + " --out " + q(out / "data")), 0);
  ASSERT_EQ(run("train -c " + q(cfg_path) + " --data " + q(out / "data") + " --out " + q(out)), 0);
  ASSERT_EQ(run("coteach -c " + q(cfg_path) + " --data " + q(out / "data") + " --model1 " +
                q(out / "model1.ckpt.json") + " --model2 " + q(out / "model2.ckpt.json") +
                " --out " + q(out)),
            0);

  const auto cfg = pipeline::load_config(cfg_path);
  const auto data = pipeline::make_classification_data(cfg.data);
  const auto fused = pipeline::run_two_stage(cfg, data);
  EXPECT_EQ(io::load_checkpoint(out / "model1.ckpt.json").model, fused.stage1_first);
  EXPECT_EQ(io::load_checkpoint(out / "model2.ckpt.json").model, fused.stage1_second);
  EXPECT_EQ(io::load_checkpoint(out / "final1.ckpt.json").model, fused.stage2.first);
  EXPECT_EQ(io::load_checkpoint(out / "final2.ckpt.json").model, fused.stage2.second);
  const auto doc = nlohmann::json::parse(io::read_text(out / "coteach.json"));
  EXPECT_EQ(doc["summary"]["ensemble_test_accuracy"].get<double>(), fused.ensemble_test_accuracy);
  EXPECT_EQ(doc["config"], pipeline::to_json(cfg));
}

TEST(Cli, ResumedTrainingMatchesUninterrupted) {
  const auto cfg = small_config_file();
  auto full = work_dir("resume_full"), part = work_dir("resume_part"), rest = work_dir("resume_rest");
  ASSERT_EQ(run("train -c " + q(cfg) + " --set stage1.epochs=3 --out " + q(full)), 0);
  ASSERT_EQ(run("train -c " + q(cfg) + " --set stage1.epochs=1 --out " + q(part)), 0);
  ASSERT_EQ(run("train -c " + q(cfg) + " --set stage1.epochs=3 --resume " + q(part) + " --out " +
                q(rest)),
            0);
  for (auto f : {"model1.ckpt.json", "model2.ckpt.json"}) {
    const auto a = io::load_checkpoint(full / f), b = io::load_checkpoint(rest / f);
    EXPECT_EQ(a.model, b.model) << f;
    EXPECT_EQ(a.optimizer, b.optimizer) << f;
    EXPECT_EQ(a.cursor, b.cursor) << f;
  }
}
