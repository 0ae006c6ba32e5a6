#include <gtest/gtest.h>

#include <cmath>

#include "nestco/error.hpp"
#include "nestco/mlp.hpp"
#include "nestco/nested_dropout.hpp"
#include "oracles.hpp"

using namespace nestco;
using namespace nestco::nested;
using ad::Tape;
using ad::Tensor;

namespace {

KDistribution dist(std::size_t K, double sigma) { return k_distribution({sigma, K}); }

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(KDistribution, SingleChannel) {
  auto d = dist(1, 3.0);
  ASSERT_EQ(d.channels(), 1u);
  EXPECT_EQ(d.prob(1), 1.0);
}

TEST(KDistribution, TwoChannelsUnitSigma) {
  auto d = dist(2, 1.0);
  EXPECT_NEAR(d.prob(1), 0.8176, 1e-4);
  EXPECT_NEAR(d.prob(2), 0.1824, 1e-4);
  const double a = std::exp(-0.5), b = std::exp(-2.0);
  EXPECT_NEAR(d.prob(1), a / (a + b), 1e-15);
}

TEST(KDistribution, HugeSigmaIsUniform) {
  auto d = dist(3, 1e9);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_NEAR(d.prob(k), 1.0 / 3.0, 1e-9);
}

TEST(KDistribution, MatchesLongDoubleReference) {
  for (double sigma : {1.0, 25.0, 200.0}) {
    auto d = dist(128, sigma);
    auto ref = oracle::nested_probs(128, sigma);
    for (std::size_t k = 1; k <= 128; ++k) EXPECT_NEAR(d.prob(k), ref[k - 1], 1e-14);
  }
}

TEST(KDistribution, DecreasingAndNormalized) {
  for (double sigma : {5.0, 25.0, 200.0, 1e4}) {
    auto d = dist(128, sigma);
    double total = 0;
    for (std::size_t k = 1; k <= 128; ++k) {
      total += d.prob(k);
      if (k > 1) EXPECT_LT(d.prob(k), d.prob(k - 1)) << "sigma " << sigma << " k " << k;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(KDistribution, SmallerSigmaFavorsSmallK) {
  double prev = 1.0;
  for (double sigma : {1.0, 5.0, 25.0, 100.0, 1000.0}) {
    const double p1 = dist(64, sigma).prob(1);
    EXPECT_LE(p1, prev);
    prev = p1;
  }
}

TEST(KDistribution, InvalidConfig) {
  EXPECT_THROW(k_distribution({1.0, 0}), ValidationError);
  EXPECT_THROW(k_distribution({0.0, 4}), ValidationError);
  EXPECT_THROW(k_distribution({-1.0, 4}), ValidationError);
}

TEST(SampleK, Degenerate) {
  Rng rng(0);
  auto one = dist(1, 5.0);
  auto last = KDistribution::from_probs({0.0, 1.0});
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(sample_k(one, rng), 1u);
    ASSERT_EQ(sample_k(last, rng), 2u);
  }
}

TEST(SampleK, EmpiricalFrequencies) {
  auto d = dist(128, 25.0);
  Rng rng(123);
  std::vector<double> counts(128, 0.0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) counts[sample_k(d, rng) - 1] += 1.0;
  double tv = 0;
  for (std::size_t k = 0; k < 128; ++k) tv += std::abs(counts[k] / n - d.probs()[k]);
  EXPECT_LT(tv / 2, 0.01);
}

TEST(SampleK, ReproducibleUnderSeed) {
  auto d = dist(128, 50.0);
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_k(d, a), sample_k(d, b));
}

TEST(NestedMask, KeepsPrefix) {
  Tape tape;
  auto h = Tensor::vector({3, 1, 4, 1, 5});
  EXPECT_EQ(vals(apply_nested_mask(tape, h, 2)), (std::vector<double>{3, 1, 0, 0, 0}));
  EXPECT_EQ(vals(apply_nested_mask(tape, h, 5)), vals(h));
}

TEST(NestedMask, MasksEveryRow) {
  Tape tape;
  auto h = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(vals(apply_nested_mask(tape, h, 1)), (std::vector<double>{1, 0, 0, 4, 0, 0}));
}

TEST(NestedMask, BackwardRoutesOnlyKeptChannels) {
  Tape tape;
  auto h = Tensor::vector({3, 1, 4, 1, 5}, true);
  tape.backward(ad::sum(tape, apply_nested_mask(tape, h, 2)));
  EXPECT_EQ(std::vector<double>(h.grad().begin(), h.grad().end()),
            (std::vector<double>{1, 1, 0, 0, 0}));
}

TEST(NestedMask, BackwardMatchesFiniteDifferences) {
  const std::vector<double> h0{0.3, -1.2, 0.8, 2.0, -0.5};
  const std::vector<double> w{1.5, -2.0, 0.7, 3.0, 1.1};
  Tape tape;
  auto h = Tensor::vector(h0, true);
  tape.backward(ad::sum(tape, ad::mul(tape, apply_nested_mask(tape, h, 3), Tensor::vector(w))));
  auto f = [&](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += x[i] * w[i];
    return s;
  };
  auto numeric = oracle::numeric_gradient(f, h0);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(h.grad()[i], numeric[i], 1e-9);
}

TEST(NestedMask, OutOfRangeK) {
  Tape tape;
  auto h = Tensor::vector({1, 2});
  EXPECT_THROW(apply_nested_mask(tape, h, 0), ValidationError);
  EXPECT_THROW(apply_nested_mask(tape, h, 3), ValidationError);
}

TEST(NestedMask, LawsOnRandomTensors) {
  Rng rng(5);
  const std::size_t K = 16;
  std::vector<double> v(3 * K);
  for (auto& x : v) x = standard_normal(rng);
  auto h = Tensor::matrix(3, K, v);
  Tape tape;
  for (std::size_t k2 = 1; k2 <= K; ++k2) {
    auto m2 = apply_nested_mask(tape, h, k2);
    EXPECT_EQ(vals(apply_nested_mask(tape, m2, k2)), vals(m2));
    for (std::size_t k1 = 1; k1 <= k2; ++k1)
      ASSERT_EQ(vals(apply_nested_mask(tape, m2, k1)), vals(apply_nested_mask(tape, h, k1)));
  }
}

TEST(NestedMask, ParametersFeedingDroppedChannelsGetZeroGradient) {
  Rng rng(6);
  nn::Mlp model({nn::make_linear(2, 6, rng), nn::Relu{}, nn::make_linear(6, 1, rng)}, {1});
  auto binding = model.bind(true);
  Tape tape;
  auto x = Tensor::matrix(3, 2, {0.5, -1, 1, 2, -0.3, 0.7});
  auto y = model.forward(tape, x, {.mask_k = 2, .training = true}, binding);
  tape.backward(ad::sum(tape, y));
  const auto& w1 = binding.tensors[0];
  const auto& b1 = binding.tensors[1];
  const auto& w2 = binding.tensors[2];
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 2; c < 6; ++c) EXPECT_EQ(w1.grad()[r * 6 + c], 0.0);
  for (std::size_t c = 2; c < 6; ++c) {
    EXPECT_EQ(b1.grad()[c], 0.0);
    EXPECT_EQ(w2.grad()[c], 0.0);
  }
}
