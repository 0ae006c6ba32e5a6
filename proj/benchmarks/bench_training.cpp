#include <benchmark/benchmark.h>

#include <numeric>

#include "nestco/coteaching.hpp"
#include "nestco/datasets.hpp"
#include "nestco/pipeline.hpp"
#include "nestco/training.hpp"

using namespace nestco;

namespace {

struct Fixture {
  pipeline::ExperimentConfig cfg;
  data::NoisyClassificationDataset ds;
  ad::Tensor x;
  nn::Mlp model;

  Fixture() {
    cfg.data.train_size = 128;
    cfg.data.val_size = 64;
    cfg.data.test_size = 64;
    ds = pipeline::make_classification_data(cfg.data).train;
    x = nn::feature_matrix(ds);
    model = pipeline::make_classifier(cfg.model, ds.dim, ds.class_count, 5);
  }
};

void BM_TrainStep(benchmark::State& state) {
  Fixture f;
  nn::SgdState sgd;
  const std::optional<std::size_t> k =
      state.range(0) ? std::optional<std::size_t>(40) : std::nullopt;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nn::train_step_ce(f.model, sgd, f.cfg.stage1.sgd, 1e-3, f.x, f.ds.noisy_labels, k));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1);

void BM_CoteachStep(benchmark::State& state) {
  Fixture f;
  auto second = f.model;
  nn::SgdState s1, s2;
  const auto dist = nested::k_distribution({200.0, f.cfg.model.width});
  coteach::StepOptions opts;
  opts.keep_fraction = 0.7;
  opts.sgd = f.cfg.stage2.sgd;
  opts.lr = 1e-3;
  opts.k_dist = &dist;
  Rng rng(6);
  const coteach::Batch batch{f.x, f.ds.noisy_labels, f.ds.clean_flags};
  for (auto _ : state)
    benchmark::DoNotOptimize(coteach::coteach_step(batch, {f.model, s1}, {second, s2}, opts, rng));
}
BENCHMARK(BM_CoteachStep);

}  // namespace
