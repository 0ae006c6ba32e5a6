#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nestco/datasets.hpp"
#include "nestco/mlp.hpp"

namespace nestco::pipeline {

enum class ToyOptimizer { adam, sgd };

struct ToyConfig {
  std::size_t points = 64;
  double lo = 0.0;
  double hi = 10.0;
  double noise_std = 1.0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 128;
  std::size_t epochs = 100000;
  ToyOptimizer optimizer = ToyOptimizer::sgd;
  double lr = 1e-3;
  /// Used by the sgd optimizer only.
  double momentum = 0.9;
  double sigma_nest = 200.0;
  /// Truncation depths at which the nested model is evaluated.
  std::vector<std::size_t> eval_ks = {1, 10, 100};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ToyCurve {
  std::string name;
  /// Unset for the plain model.
  std::optional<std::size_t> k;
  std::vector<double> prediction;
  double mse_to_truth = 0.0;
  double mse_to_noisy = 0.0;
};

struct ToyResult {
  data::RegressionDataset data;
  /// Plain model first, then the nested model at each eval k.
  std::vector<ToyCurve> curves;
  double final_loss_plain = 0.0;
  double final_loss_nested = 0.0;

  const ToyCurve& curve(std::optional<std::size_t> k) const;
};

/// 1 -> hidden1 -> hidden2 -> 1 with ReLU after the first two layers. The
/// nested variant truncates the hidden2 features that feed the output layer.
nn::Mlp make_toy_mlp(std::size_t hidden1, std::size_t hidden2, bool nested, std::uint64_t seed);

/// Trains a plain and a nested model full-batch on the same data from the
/// same initial weights, then evaluates both on the training inputs.
ToyResult run_toy_experiment(const ToyConfig& config);

/// Columns x, y_noisy, truth, then one column per curve.
std::string toy_table_csv(const ToyResult& result);
/// One panel per curve over the noisy points and the ground truth.
std::string toy_plot_svg(const ToyResult& result);

}  // namespace nestco::pipeline
