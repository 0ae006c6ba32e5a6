#include <benchmark/benchmark.h>

#include <vector>

#include "nestco/nested_dropout.hpp"
#include "nestco/random.hpp"
#include "nestco/tensor.hpp"

using namespace nestco;

namespace {

ad::Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, bool grad) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = standard_normal(rng);
  return ad::Tensor::matrix(rows, cols, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(128, n, rng, false);
  const auto b = random_matrix(n, n, rng, false);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(ad::matmul(tape, a, b));
  }
  state.SetItemsProcessed(state.iterations() * 128 * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_AffineForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto x = random_matrix(128, n, rng, true);
  const auto w = random_matrix(n, n, rng, true);
  const auto b = ad::Tensor::zeros({n}, true);
  for (auto _ : state) {
    ad::Tape tape;
    tape.backward(ad::sum(tape, ad::relu(tape, ad::affine(tape, x, w, b))));
  }
}
BENCHMARK(BM_AffineForwardBackward)->Arg(32)->Arg(128)->Arg(256);

void BM_SampleK(benchmark::State& state) {
  const auto dist = nested::k_distribution({200.0, 128});
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(nested::sample_k(dist, rng));
}
BENCHMARK(BM_SampleK);

void BM_NestedMask(benchmark::State& state) {
  Rng rng(4);
  const auto h = random_matrix(128, 128, rng, true);
  for (auto _ : state) {
    ad::Tape tape;
    tape.backward(ad::sum(tape, nested::apply_nested_mask(tape, h, 40)));
  }
}
BENCHMARK(BM_NestedMask);

}  // namespace
