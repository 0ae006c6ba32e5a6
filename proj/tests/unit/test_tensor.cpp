#include <gtest/gtest.h>

#include <cmath>

#include "nestco/error.hpp"
#include "nestco/random.hpp"
#include "nestco/tensor.hpp"
#include "oracles.hpp"

using namespace nestco;
using namespace nestco::ad;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }
std::vector<double> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2 * uniform01(rng) - 1;
  return v;
}

}  // namespace

TEST(Tensor, HandlesShareStorage) {
  Tensor a = Tensor::vector({1, 2});
  Tensor b = a;
  b.mutable_values()[0] = 5;
  EXPECT_EQ(a[0], 5);
  Tensor c = a.clone();
  c.mutable_values()[0] = 7;
  EXPECT_EQ(a[0], 5);
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, ConstructorRejectsWrongValueCount) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Matmul, IdentityTimesMatrix) {
  Tape tape;
  auto c = matmul(tape, Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::matrix(2, 2, {3, 4, 5, 6}));
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_EQ(vals(c), (std::vector<double>{3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  Tape tape;
  auto c = matmul(tape, Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(vals(c), (std::vector<double>{11}));
}

TEST(Matmul, MatchesNaiveProduct) {
  Rng rng(1);
  auto a = random_values(5 * 7, rng);
  auto b = random_values(7 * 3, rng);
  Tape tape;
  auto c = matmul(tape, Tensor::matrix(5, 7, a), Tensor::matrix(7, 3, b));
  auto ref = oracle::matmul(a, b, 5, 7, 3);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  try {
    matmul(tape, Tensor::matrix(2, 3, std::vector<double>(6)), Tensor::matrix(2, 3, std::vector<double>(6)));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Affine, EqualsMatmulPlusBias) {
  Rng rng(2);
  auto x = random_values(4 * 3, rng), w = random_values(3 * 2, rng), b = random_values(2, rng);
  Tape tape;
  auto y = affine(tape, Tensor::matrix(4, 3, x), Tensor::matrix(3, 2, w), Tensor::vector(b));
  auto ref = oracle::matmul(x, w, 4, 3, 2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(y[r * 2 + c], ref[r * 2 + c] + b[c], 1e-12);
}

TEST(Elementwise, ReluAndAdd) {
  Tape tape;
  EXPECT_EQ(vals(relu(tape, Tensor::vector({-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(vals(add(tape, Tensor::vector({1, 2}), Tensor::vector({3, 4}))),
            (std::vector<double>{4, 6}));
  EXPECT_EQ(vals(sub(tape, Tensor::vector({1, 2}), Tensor::vector({3, 4}))),
            (std::vector<double>{-2, -2}));
  EXPECT_EQ(vals(mul(tape, Tensor::vector({1, 2}), Tensor::vector({3, 4}))),
            (std::vector<double>{3, 8}));
  EXPECT_EQ(vals(scale(tape, Tensor::vector({1, 2}), -2)), (std::vector<double>{-2, -4}));
}

TEST(Elementwise, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(add(tape, Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
}

TEST(Elementwise, ReluBackwardAtZeroIsZero) {
  Tape tape;
  Tensor x = Tensor::vector({-1, 0, 2}, true);
  tape.backward(sum(tape, relu(tape, x)));
  EXPECT_EQ(grads(x), (std::vector<double>{0, 0, 1}));
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  Tape tape;
  std::vector<int> labels{0};
  auto l = softmax_cross_entropy(tape, Tensor::matrix(1, 2, {0, 0}), labels);
  EXPECT_NEAR(l[0], std::log(2.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, HugeLogitIsStable) {
  Tape tape;
  std::vector<int> labels{0};
  auto l = softmax_cross_entropy(tape, Tensor::matrix(1, 2, {1000, 0}), labels);
  EXPECT_TRUE(std::isfinite(l[0]));
  EXPECT_NEAR(l[0], 0.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, MatchesLongDoubleReference) {
  Rng rng(3);
  auto logits = random_values(6 * 4, rng);
  std::vector<int> labels{0, 3, 1, 2, 2, 0};
  Tape tape;
  auto l = softmax_cross_entropy(tape, Tensor::matrix(6, 4, logits), labels);
  auto ref = oracle::cross_entropy(logits, 4, labels);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(l[i], ref[i], 1e-12);
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  Tape tape;
  std::vector<int> labels{2};
  EXPECT_THROW(softmax_cross_entropy(tape, Tensor::matrix(1, 2, {0, 0}), labels), ValidationError);
}

TEST(Mse, Examples) {
  Tape tape;
  EXPECT_EQ(mse(tape, Tensor::vector({1, 2}), Tensor::vector({1, 2})).item(), 0.0);
  EXPECT_EQ(mse(tape, Tensor::vector({0, 0}), Tensor::vector({1, 1})).item(), 1.0);
  EXPECT_NEAR(mse(tape, Tensor::vector({1, 2, 3}), Tensor::vector({2, 2, 2})).item(), 2.0 / 3.0,
              1e-15);
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Tensor w = Tensor::vector({1, 2, 3}, true);
  tape.backward(sum(tape, w));
  EXPECT_EQ(grads(w), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, LinearModelClosedForm) {
  const std::vector<double> xs{0.5, -1.0, 2.0, 3.0};
  const std::vector<double> ys{1.0, 0.0, -2.0, 4.0};
  const double wv = 0.7;
  Tape tape;
  Tensor w = Tensor::scalar(wv, true);
  Tensor x = Tensor::vector(xs);
  auto pred = mul(tape, x, w);
  tape.backward(mse(tape, pred, Tensor::vector(ys)));
  double expect = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) expect += 2 * (wv * xs[i] - ys[i]) * xs[i];
  expect /= static_cast<double>(xs.size());
  EXPECT_NEAR(w.grad()[0], expect, 1e-12);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Tensor w = Tensor::vector({1, 2}, true);
  auto y = scale(tape, w, 2);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, RepeatedBackwardAccumulatesLeaves) {
  Tape tape;
  Tensor w = Tensor::vector({1, 2}, true);
  auto loss = sum(tape, mul(tape, w, w));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_EQ(grads(w), (std::vector<double>{4, 8}));
}

TEST(Backward, MatmulGradientMatchesFiniteDifferences) {
  Rng rng(4);
  auto a0 = random_values(3 * 4, rng), b0 = random_values(4 * 2, rng);
  Tape tape;
  Tensor a = Tensor::matrix(3, 4, a0, true);
  Tensor b = Tensor::matrix(4, 2, b0);
  tape.backward(sum(tape, relu(tape, matmul(tape, a, b))));
  auto f = [&](const std::vector<double>& av) {
    auto c = oracle::matmul(av, b0, 3, 4, 2);
    double s = 0;
    for (double v : c) s += std::max(0.0, v);
    return s;
  };
  EXPECT_LT(oracle::max_rel_error(grads(a), oracle::numeric_gradient(f, a0)), 1e-7);
}

TEST(Backward, NoGradInputsRecordNothing) {
  Tape tape;
  add(tape, Tensor::vector({1}), Tensor::vector({2}));
  EXPECT_TRUE(tape.empty());
}
