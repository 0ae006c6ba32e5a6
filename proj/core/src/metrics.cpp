#include "nestco/metrics.hpp"

#include <charconv>
#include <sstream>

#include "nestco/checkpoint.hpp"
#include "nestco/error.hpp"

namespace nestco::pipeline {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ContractError("format_double: conversion failed");
  return std::string(buf, end);
}

void RunMetrics::check_contiguous() const {
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i].epoch != i) {
      throw ContractError("metrics: epoch " + std::to_string(epochs[i].epoch) + " at position " +
                          std::to_string(i));
    }
  }
}

json to_json(const EpochRecord& r) {
  json j = {{"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"lr", r.lr},
            {"val_accuracy", r.val_accuracy},
            {"test_accuracy", r.test_accuracy}};
  auto put = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("train_loss_second", r.train_loss_second);
  put("val_accuracy_second", r.val_accuracy_second);
  put("test_accuracy_second", r.test_accuracy_second);
  put("ensemble_test_accuracy", r.ensemble_test_accuracy);
  put("keep_fraction", r.keep_fraction);
  put("purity_first", r.purity_first);
  put("purity_second", r.purity_second);
  put("kept_first", r.kept_first);
  put("kept_second", r.kept_second);
  return j;
}

json to_json(const RunMetrics& m) {
  m.check_contiguous();
  json epochs = json::array();
  for (const auto& e : m.epochs) epochs.push_back(to_json(e));
  json sweep = json::array();
  for (const auto& row : m.k_sweep) {
    sweep.push_back({{"k", row.k}, {"val_accuracy", row.val_accuracy},
                     {"test_accuracy", row.test_accuracy}});
  }
  return {{"command", m.command}, {"seed", m.seed},     {"config", m.config},
          {"epochs", epochs},     {"k_sweep", sweep},   {"summary", m.summary}};
}

RunMetrics metrics_from_json(const json& doc) {
  RunMetrics m;
  try {
    m.command = doc.at("command").get<std::string>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.config = doc.at("config");
    m.summary = doc.at("summary");
    for (const auto& e : doc.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<std::size_t>();
      r.train_loss = e.at("train_loss").get<double>();
      r.lr = e.at("lr").get<double>();
      r.val_accuracy = e.at("val_accuracy").get<double>();
      r.test_accuracy = e.at("test_accuracy").get<double>();
      auto get = [&](const char* key, auto& out) {
        if (e.contains(key)) out = e.at(key).get<typename std::decay_t<decltype(out)>::value_type>();
      };
      get("train_loss_second", r.train_loss_second);
      get("val_accuracy_second", r.val_accuracy_second);
      get("test_accuracy_second", r.test_accuracy_second);
      get("ensemble_test_accuracy", r.ensemble_test_accuracy);
      get("keep_fraction", r.keep_fraction);
      get("purity_first", r.purity_first);
      get("purity_second", r.purity_second);
      get("kept_first", r.kept_first);
      get("kept_second", r.kept_second);
      m.epochs.push_back(r);
    }
    for (const auto& row : doc.at("k_sweep")) {
      m.k_sweep.push_back({row.at("k").get<std::size_t>(), row.at("val_accuracy").get<double>(),
                           row.at("test_accuracy").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics: ") + e.what(), 0);
  }
  m.check_contiguous();
  return m;
}

std::string epochs_csv(const RunMetrics& m) {
  const bool stage2 = !m.epochs.empty() && m.epochs.front().purity_first.has_value();
  std::ostringstream os;
  os << "epoch,train_loss,lr,val_accuracy,test_accuracy";
  if (stage2) {
    os << ",train_loss_second,val_accuracy_second,test_accuracy_second,ensemble_test_accuracy,"
          "keep_fraction,purity_first,purity_second,kept_first,kept_second";
  }
  os << '\n';
  for (const auto& e : m.epochs) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.lr) << ','
       << format_double(e.val_accuracy) << ',' << format_double(e.test_accuracy);
    if (stage2) {
      auto opt = [&](const std::optional<double>& v) {
        os << ',' << (v ? format_double(*v) : std::string());
      };
      opt(e.train_loss_second);
      opt(e.val_accuracy_second);
      opt(e.test_accuracy_second);
      opt(e.ensemble_test_accuracy);
      opt(e.keep_fraction);
      opt(e.purity_first);
      opt(e.purity_second);
      os << ',' << e.kept_first.value_or(0) << ',' << e.kept_second.value_or(0);
    }
    os << '\n';
  }
  return os.str();
}

std::string k_sweep_csv(const std::vector<KSweepRow>& rows) {
  std::ostringstream os;
  os << "k,val_accuracy,test_accuracy\n";
  for (const auto& r : rows) {
    os << r.k << ',' << format_double(r.val_accuracy) << ',' << format_double(r.test_accuracy)
       << '\n';
  }
  return os.str();
}

void write_metrics(const RunMetrics& m, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / (stem + ".json"), to_json(m).dump(2) + "\n");
  if (!m.epochs.empty()) io::write_text(dir / (stem + "_epochs.csv"), epochs_csv(m));
  if (!m.k_sweep.empty()) io::write_text(dir / (stem + "_k_sweep.csv"), k_sweep_csv(m.k_sweep));
  io::write_text(dir / (stem + "_timing.json"),
                 json{{"wall_clock_seconds", m.wall_clock_seconds}}.dump(2) + "\n");
}

}  // namespace nestco::pipeline
