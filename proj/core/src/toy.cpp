#include "nestco/toy.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nestco/error.hpp"
#include "nestco/nested_dropout.hpp"
#include "nestco/optim.hpp"
#include "nestco/random.hpp"
#include "nestco/svg_plot.hpp"
#include "nestco/tensor.hpp"

namespace nestco::pipeline {

void ToyConfig::validate() const {
  if (points < 2) throw ValidationError("toy: points must be >= 2");
  if (!(lo < hi)) throw ValidationError("toy: lo must be below hi");
  if (!(noise_std >= 0.0)) throw ValidationError("toy: noise_std must be >= 0");
  if (hidden1 == 0 || hidden2 == 0) throw ValidationError("toy: hidden sizes must be positive");
  if (!(lr > 0.0)) throw ValidationError("toy: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("toy: momentum must lie in [0, 1)");
  nested::NestedConfig{sigma_nest, hidden2}.validate();
  for (auto k : eval_ks) {
    if (k < 1 || k > hidden2) {
      throw ValidationError("toy: eval k = " + std::to_string(k) + " outside [1, " +
                            std::to_string(hidden2) + "]");
    }
  }
}

const ToyCurve& ToyResult::curve(std::optional<std::size_t> k) const {
  for (const auto& c : curves) {
    if (c.k == k) return c;
  }
  throw ValidationError("toy: no curve for k = " + (k ? std::to_string(*k) : std::string("full")));
}

nn::Mlp make_toy_mlp(std::size_t hidden1, std::size_t hidden2, bool nested, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::Layer> layers;
  layers.emplace_back(nn::make_linear(1, hidden1, rng));
  layers.emplace_back(nn::Relu{});
  layers.emplace_back(nn::make_linear(hidden1, hidden2, rng));
  layers.emplace_back(nn::Relu{});
  layers.emplace_back(nn::make_linear(hidden2, 1, rng));
  std::set<std::size_t> positions;
  if (nested) positions.insert(3);
  return nn::Mlp(std::move(layers), std::move(positions));
}

namespace {

double mse(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

double train(nn::Mlp& model, const ad::Tensor& x, const ad::Tensor& y, const ToyConfig& cfg,
             const nested::KDistribution* dist, Rng& rng) {
  nn::AdamState adam;
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  nn::SgdState sgd;
  nn::SgdConfig sgd_cfg;
  sgd_cfg.momentum = cfg.momentum;
  sgd_cfg.weight_decay = 0.0;
  sgd_cfg.schedule.base_lr = cfg.lr;

  double last = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    auto binding = model.bind(true);
    nn::ForwardOptions opts;
    opts.training = true;
    if (dist) opts.mask_k = dist->sample(rng);
    auto loss = ad::mse(tape, model.forward(tape, x, opts, binding), y);
    last = loss.item();
    if (!std::isfinite(last)) {
      throw TrainingError("toy: non-finite loss at epoch " + std::to_string(epoch));
    }
    tape.backward(loss);
    auto params = model.parameters();
    auto grads = binding.grads();
    if (cfg.optimizer == ToyOptimizer::adam) {
      nn::adam_step(params, grads, adam, adam_cfg);
    } else {
      nn::sgd_step(params, grads, sgd, sgd_cfg, cfg.lr);
    }
  }
  return last;
}

}  // namespace

ToyResult run_toy_experiment(const ToyConfig& cfg) {
  cfg.validate();
  ToyResult result;
  result.data = data::gen_toy_regression(cfg.points, cfg.lo, cfg.hi, cfg.noise_std,
                                         derive_seed(cfg.seed, 0));
  const auto n = cfg.points;
  const auto x = ad::Tensor::matrix(n, 1, result.data.x);
  const auto y = ad::Tensor::vector(result.data.y);

  const auto init_seed = derive_seed(cfg.seed, 1);
  auto plain = make_toy_mlp(cfg.hidden1, cfg.hidden2, false, init_seed);
  auto nested_model = make_toy_mlp(cfg.hidden1, cfg.hidden2, true, init_seed);
  const auto dist = nested::k_distribution({cfg.sigma_nest, cfg.hidden2});

  Rng unused(derive_seed(cfg.seed, 2));
  result.final_loss_plain = train(plain, x, y, cfg, nullptr, unused);
  Rng k_rng(derive_seed(cfg.seed, 3));
  result.final_loss_nested = train(nested_model, x, y, cfg, &dist, k_rng);

  auto add_curve = [&](std::string name, const nn::Mlp& model, std::optional<std::size_t> k) {
    ToyCurve c;
    c.name = std::move(name);
    c.k = k;
    const auto out = model.infer(x, k);
    c.prediction.assign(out.values().begin(), out.values().end());
    c.mse_to_truth = mse(c.prediction, result.data.truth);
    c.mse_to_noisy = mse(c.prediction, result.data.y);
    result.curves.push_back(std::move(c));
  };
  add_curve("mlp", plain, std::nullopt);
  for (auto k : cfg.eval_ks) add_curve("nested_k" + std::to_string(k), nested_model, k);
  return result;
}

std::string toy_table_csv(const ToyResult& result) {
  std::ostringstream os;
  os << "x,y_noisy,truth";
  for (const auto& c : result.curves) os << ',' << c.name;
  os << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t i = 0; i < result.data.size(); ++i) {
    put(result.data.x[i]);
    os << ',';
    put(result.data.y[i]);
    os << ',';
    put(result.data.truth[i]);
    for (const auto& c : result.curves) {
      os << ',';
      put(c.prediction[i]);
    }
    os << '\n';
  }
  return os.str();
}

std::string toy_plot_svg(const ToyResult& result) {
  std::vector<plot::Panel> panels;
  for (const auto& c : result.curves) {
    plot::Panel p;
    char title[96];
    std::snprintf(title, sizeof title, "%s (mse to truth %.3f)",
                  c.k ? ("nested, k = " + std::to_string(*c.k)).c_str() : "plain MLP",
                  c.mse_to_truth);
    p.title = title;
    p.series.push_back({"noisy y", result.data.x, result.data.y, "#888888", true, false});
    p.series.push_back({"truth y = x", result.data.x, result.data.truth, "#2ca02c", false, true});
    p.series.push_back({"prediction", result.data.x, c.prediction, "#d62728", false, false});
    panels.push_back(std::move(p));
  }
  return plot::render_svg(panels);
}

}  // namespace nestco::pipeline
