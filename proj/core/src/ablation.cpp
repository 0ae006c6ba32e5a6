#include "nestco/ablation.hpp"

#include <cmath>
#include <sstream>

#include "nestco/error.hpp"
#include "nestco/metrics.hpp"

namespace nestco::pipeline {

Stat summarize(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("summarize: no values");
  Stat s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

ExperimentConfig ablation_cell_config(const ExperimentConfig& base, std::optional<double> sigma,
                                      std::uint64_t seed) {
  auto cfg = base;
  cfg.nested_enabled = sigma.has_value();
  if (sigma) cfg.sigma_nest = *sigma;
  cfg.stage1.seed = derive_seed(base.stage1.seed, seed);
  cfg.stage2.seed = derive_seed(base.stage2.seed, seed);
  return cfg;
}

AblationResult run_ablation(const ExperimentConfig& config, const ClassificationData& data) {
  config.ablation.validate();
  std::vector<std::optional<double>> sigmas;
  if (config.ablation.include_ce) sigmas.emplace_back(std::nullopt);
  for (double s : config.ablation.sigmas) sigmas.emplace_back(s);

  AblationResult result;
  for (const auto& sigma : sigmas) {
    std::vector<double> k, acc, full, co;
    for (auto seed : config.ablation.seeds) {
      const auto run = run_two_stage(ablation_cell_config(config, sigma, seed), data);
      AblationCell cell;
      cell.sigma = sigma;
      cell.seed = seed;
      cell.k_star = 0.5 * static_cast<double>(run.stage1_scores[0].k_star +
                                              run.stage1_scores[1].k_star);
      cell.accuracy = 0.5 * (run.stage1_scores[0].test_accuracy + run.stage1_scores[1].test_accuracy);
      cell.accuracy_full =
          0.5 * (run.stage1_scores[0].test_accuracy_full + run.stage1_scores[1].test_accuracy_full);
      cell.coteach_k_star = 0.5 * static_cast<double>(run.stage2_scores[0].k_star +
                                                      run.stage2_scores[1].k_star);
      cell.coteach_accuracy = run.ensemble_test_accuracy;
      k.push_back(cell.k_star);
      acc.push_back(cell.accuracy);
      full.push_back(cell.accuracy_full);
      co.push_back(cell.coteach_accuracy);
      result.cells.push_back(cell);
    }
    AblationRow row;
    row.label = sigma ? "sigma=" + format_double(*sigma) : "CE";
    row.sigma = sigma;
    row.runs = config.ablation.seeds.size();
    row.k_star = summarize(k);
    row.accuracy = summarize(acc);
    row.accuracy_full = summarize(full);
    row.coteach_accuracy = summarize(co);
    result.rows.push_back(row);
  }
  return result;
}

namespace {

std::string stat_cells(const Stat& s) {
  return format_double(s.mean) + "," + (s.std ? format_double(*s.std) : std::string());
}

}  // namespace

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream os;
  os << "label,sigma,runs,k_star_mean,k_star_std,accuracy_mean,accuracy_std,"
        "accuracy_full_mean,accuracy_full_std,coteach_accuracy_mean,coteach_accuracy_std\n";
  for (const auto& r : result.rows) {
    os << r.label << ',' << (r.sigma ? format_double(*r.sigma) : std::string()) << ',' << r.runs
       << ',' << stat_cells(r.k_star) << ',' << stat_cells(r.accuracy) << ','
       << stat_cells(r.accuracy_full) << ',' << stat_cells(r.coteach_accuracy) << '\n';
  }
  return os.str();
}

std::string ablation_cells_csv(const AblationResult& result) {
  std::ostringstream os;
  os << "sigma,seed,k_star,accuracy,accuracy_full,coteach_k_star,coteach_accuracy\n";
  for (const auto& c : result.cells) {
    os << (c.sigma ? format_double(*c.sigma) : std::string()) << ',' << c.seed << ','
       << format_double(c.k_star) << ',' << format_double(c.accuracy) << ','
       << format_double(c.accuracy_full) << ',' << format_double(c.coteach_k_star) << ','
       << format_double(c.coteach_accuracy) << '\n';
  }
  return os.str();
}

}  // namespace nestco::pipeline
