#include "nestco/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nestco/error.hpp"
#include "nestco/metrics.hpp"

namespace nestco::pipeline {

void DataConfig::validate() const {
  if (train_size == 0 || val_size == 0 || test_size == 0) {
    throw ValidationError("data: split sizes must be positive");
  }
  if (classes < 2) throw ValidationError("data: need at least two classes");
  if (dim == 0) throw ValidationError("data: dim must be positive");
  if (!(separation > 0.0)) throw ValidationError("data: separation must be positive");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw ValidationError("data: noise_rate must lie in [0, 1)");
  }
}

void ModelConfig::validate() const {
  if (hidden == 0 || width == 0) throw ValidationError("model: layer widths must be positive");
}

void Stage1Config::validate() const {
  if (epochs < 1) throw ValidationError("stage1: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("stage1: batch_size must be >= 1");
  sgd.validate();
  if (nested) nested->validate();
}

void Stage2Config::validate() const {
  if (epochs < 1) throw ValidationError("stage2: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("stage2: batch_size must be >= 1");
  sgd.validate();
  if (sgd.schedule.warmup_iters != 0) {
    throw ValidationError("stage2: warmup_iters must be 0, fine-tuning runs without warm-up");
  }
  coteach.validate();
  if (nested) nested->validate();
}

void AblationConfig::validate() const {
  if (sigmas.empty()) throw ValidationError("ablation: sigma list is empty");
  if (seeds.empty()) throw ValidationError("ablation: seed list is empty");
  for (double s : sigmas) nested::NestedConfig{s, 1}.validate();
}

ExperimentConfig::ExperimentConfig() {
  stage1.sgd.momentum = 0.9;
  stage1.sgd.weight_decay = 5e-4;
  stage1.sgd.schedule.base_lr = 0.02;
  stage1.sgd.schedule.warmup_iters = 200;
  stage1.sgd.schedule.decay = {{5, 0.1}};
  stage2.sgd = stage1.sgd;
  stage2.sgd.schedule.base_lr = 0.002;
  stage2.sgd.schedule.warmup_iters = 0;
  stage2.seed = 1;
}

std::optional<nested::NestedConfig> ExperimentConfig::nested_config() const {
  if (!nested_enabled) return std::nullopt;
  return nested::NestedConfig{sigma_nest, model.width};
}

Stage1Config ExperimentConfig::stage1_config() const {
  auto cfg = stage1;
  cfg.nested = nested_config();
  return cfg;
}

Stage2Config ExperimentConfig::stage2_config() const {
  auto cfg = stage2;
  cfg.nested = nested_config();
  return cfg;
}

void ExperimentConfig::validate() const {
  data.validate();
  model.validate();
  stage1_config().validate();
  stage2_config().validate();
  toy.validate();
  ablation.validate();
}

namespace {

using nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ValidationError("config: " + key + " = '" + value + "' is not " + want);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const auto text = trim(raw);
  T out{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end || text.empty()) {
    bad_value(key, raw, std::is_floating_point_v<T> ? "a number" : "a non-negative integer");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, raw, "a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const auto t = trim(raw);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, raw, "a boolean");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(raw);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  for (const auto& item : split_list(raw)) out.push_back(parse_number<T>(key, item));
  return out;
}

/// "5:0.1, 8:0.1" -> {(5, 0.1), (8, 0.1)}. Empty or "none" clears the list.
std::vector<std::pair<std::size_t, double>> parse_decay(const std::string& key,
                                                        const std::string& raw) {
  std::vector<std::pair<std::size_t, double>> out;
  if (trim(raw) == "none") return out;
  for (const auto& item : split_list(raw)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad_value(key, raw, "a list of epoch:factor pairs");
    out.emplace_back(parse_number<std::size_t>(key, item.substr(0, colon)),
                     parse_number<double>(key, item.substr(colon + 1)));
  }
  return out;
}

std::string decay_text(const std::vector<std::pair<std::size_t, double>>& decay) {
  if (decay.empty()) return "none";
  std::string out;
  for (const auto& [epoch, factor] : decay) {
    if (!out.empty()) out += ',';
    out += std::to_string(epoch) + ":" + format_double(factor);
  }
  return out;
}

template <class T>
std::string list_text(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<json(const ExperimentConfig&)> get;
  std::function<std::string(const ExperimentConfig&)> text;
};

template <class T, class Access>
Field number_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_number<T>(k, v);
          },
          [access](const ExperimentConfig& c) {
            return json(access(const_cast<ExperimentConfig&>(c)));
          },
          [access](const ExperimentConfig& c) {
            const T v = access(const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(v);
            } else {
              return std::to_string(v);
            }
          }};
}

template <class Access>
Field bool_field(Access access) {
  return {[access](ExperimentConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_bool(k, v);
          },
          [access](const ExperimentConfig& c) {
            return json(access(const_cast<ExperimentConfig&>(c)));
          },
          [access](const ExperimentConfig& c) {
            return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

template <class E>
Field enum_field(std::function<E&(ExperimentConfig&)> access,
                 std::vector<std::pair<std::string, E>> names) {
  auto to_text = [access, names](const ExperimentConfig& c) {
    const E v = access(const_cast<ExperimentConfig&>(c));
    for (const auto& [n, e] : names) {
      if (e == v) return n;
    }
    return std::string("?");
  };
  return {[access, names](ExperimentConfig& c, const std::string& k, const std::string& v) {
            const auto t = trim(v);
            for (const auto& [n, e] : names) {
              if (n == t) {
                access(c) = e;
                return;
              }
            }
            std::string options;
            for (const auto& [n, e] : names) options += (options.empty() ? "" : "|") + n;
            bad_value(k, v, ("one of " + options).c_str());
          },
          [to_text](const ExperimentConfig& c) { return json(to_text(c)); }, to_text};
}

const std::map<std::string, Field>& registry() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    // [data]
    f["data.train_size"] = number_field<std::size_t>([](C& c) -> auto& { return c.data.train_size; });
    f["data.val_size"] = number_field<std::size_t>([](C& c) -> auto& { return c.data.val_size; });
    f["data.test_size"] = number_field<std::size_t>([](C& c) -> auto& { return c.data.test_size; });
    f["data.classes"] = number_field<std::size_t>([](C& c) -> auto& { return c.data.classes; });
    f["data.dim"] = number_field<std::size_t>([](C& c) -> auto& { return c.data.dim; });
    f["data.separation"] = number_field<double>([](C& c) -> auto& { return c.data.separation; });
    f["data.noise"] = enum_field<NoiseKind>(
        [](C& c) -> NoiseKind& { return c.data.noise; },
        {{"none", NoiseKind::none}, {"symmetric", NoiseKind::symmetric},
         {"pairflip", NoiseKind::pairflip}});
    f["data.noise_rate"] = number_field<double>([](C& c) -> auto& { return c.data.noise_rate; });
    f["data.seed"] = number_field<std::uint64_t>([](C& c) -> auto& { return c.data.seed; });
    // [model]
    f["model.hidden"] = number_field<std::size_t>([](C& c) -> auto& { return c.model.hidden; });
    f["model.width"] = number_field<std::size_t>([](C& c) -> auto& { return c.model.width; });
    f["model.batchnorm"] = bool_field([](C& c) -> auto& { return c.model.batchnorm; });
    // [nested]
    f["nested.enabled"] = bool_field([](C& c) -> auto& { return c.nested_enabled; });
    f["nested.sigma"] = number_field<double>([](C& c) -> auto& { return c.sigma_nest; });
    // [stage1] and [stage2] share the optimizer keys.
    auto sgd_keys = [&f](const std::string& s, auto stage) {
      f[s + ".lr"] = number_field<double>(
          [stage](C& c) -> auto& { return stage(c).sgd.schedule.base_lr; });
      f[s + ".momentum"] =
          number_field<double>([stage](C& c) -> auto& { return stage(c).sgd.momentum; });
      f[s + ".weight_decay"] =
          number_field<double>([stage](C& c) -> auto& { return stage(c).sgd.weight_decay; });
      f[s + ".warmup_iters"] = number_field<std::size_t>(
          [stage](C& c) -> auto& { return stage(c).sgd.schedule.warmup_iters; });
      f[s + ".epochs"] = number_field<std::size_t>([stage](C& c) -> auto& { return stage(c).epochs; });
      f[s + ".batch_size"] =
          number_field<std::size_t>([stage](C& c) -> auto& { return stage(c).batch_size; });
      f[s + ".seed"] = number_field<std::uint64_t>([stage](C& c) -> auto& { return stage(c).seed; });
      f[s + ".decay"] = Field{
          [stage](C& c, const std::string& k, const std::string& v) {
            stage(c).sgd.schedule.decay = parse_decay(k, v);
          },
          [stage](const C& c) {
            return json(decay_text(stage(const_cast<C&>(c)).sgd.schedule.decay));
          },
          [stage](const C& c) { return decay_text(stage(const_cast<C&>(c)).sgd.schedule.decay); }};
    };
    sgd_keys("stage1", [](C& c) -> Stage1Config& { return c.stage1; });
    sgd_keys("stage2", [](C& c) -> Stage2Config& { return c.stage2; });
    f["stage2.lambda_forget"] =
        number_field<double>([](C& c) -> auto& { return c.stage2.coteach.lambda_forget; });
    f["stage2.schedule"] = enum_field<coteach::ForgetSchedule>(
        [](C& c) -> coteach::ForgetSchedule& { return c.stage2.coteach.schedule; },
        {{"fixed", coteach::ForgetSchedule::fixed}, {"gradual", coteach::ForgetSchedule::gradual}});
    f["stage2.gradual_epochs"] =
        number_field<std::size_t>([](C& c) -> auto& { return c.stage2.coteach.gradual_epochs; });
    f["stage2.selection_forward"] = enum_field<coteach::SelectionForward>(
        [](C& c) -> coteach::SelectionForward& { return c.stage2.coteach.selection_forward; },
        {{"full_channels", coteach::SelectionForward::full_channels},
         {"sampled_mask", coteach::SelectionForward::sampled_mask}});
    f["stage2.freeze_bn"] = bool_field([](C& c) -> auto& { return c.stage2.freeze_bn; });
    // [toy]
    f["toy.points"] = number_field<std::size_t>([](C& c) -> auto& { return c.toy.points; });
    f["toy.lo"] = number_field<double>([](C& c) -> auto& { return c.toy.lo; });
    f["toy.hi"] = number_field<double>([](C& c) -> auto& { return c.toy.hi; });
    f["toy.noise_std"] = number_field<double>([](C& c) -> auto& { return c.toy.noise_std; });
    f["toy.hidden1"] = number_field<std::size_t>([](C& c) -> auto& { return c.toy.hidden1; });
    f["toy.hidden2"] = number_field<std::size_t>([](C& c) -> auto& { return c.toy.hidden2; });
    f["toy.epochs"] = number_field<std::size_t>([](C& c) -> auto& { return c.toy.epochs; });
    f["toy.optimizer"] = enum_field<ToyOptimizer>(
        [](C& c) -> ToyOptimizer& { return c.toy.optimizer; },
        {{"adam", ToyOptimizer::adam}, {"sgd", ToyOptimizer::sgd}});
    f["toy.lr"] = number_field<double>([](C& c) -> auto& { return c.toy.lr; });
    f["toy.momentum"] = number_field<double>([](C& c) -> auto& { return c.toy.momentum; });
    f["toy.sigma"] = number_field<double>([](C& c) -> auto& { return c.toy.sigma_nest; });
    f["toy.seed"] = number_field<std::uint64_t>([](C& c) -> auto& { return c.toy.seed; });
    f["toy.eval_ks"] = Field{
        [](C& c, const std::string& k, const std::string& v) {
          c.toy.eval_ks = parse_list<std::size_t>(k, v);
        },
        [](const C& c) { return json(list_text(c.toy.eval_ks)); },
        [](const C& c) { return list_text(c.toy.eval_ks); }};
    // [ablation]
    f["ablation.sigmas"] = Field{
        [](C& c, const std::string& k, const std::string& v) {
          c.ablation.sigmas = parse_list<double>(k, v);
        },
        [](const C& c) { return json(list_text(c.ablation.sigmas)); },
        [](const C& c) { return list_text(c.ablation.sigmas); }};
    f["ablation.seeds"] = Field{
        [](C& c, const std::string& k, const std::string& v) {
          c.ablation.seeds = parse_list<std::uint64_t>(k, v);
        },
        [](const C& c) { return json(list_text(c.ablation.seeds)); },
        [](const C& c) { return list_text(c.ablation.seeds); }};
    f["ablation.include_ce"] = bool_field([](C& c) -> auto& { return c.ablation.include_ce; });
    return f;
  }();
  return fields;
}

}  // namespace

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& fields = registry();
  const auto it = fields.find(trim(key));
  if (it == fields.end()) throw ValidationError("config: unknown key '" + key + "'");
  it->second.set(config, it->first, value);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("config override '" + assignment + "' must look like key=value");
  }
  set_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : registry()) keys.push_back(k);
  return keys;
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ValidationError("config: key '" + section + "' must sit inside a [section]");
    }
    for (const auto& [key, value] : body) {
      set_value(config, section + "." + key, value.get_value<std::string>());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

nlohmann::json to_json(const ExperimentConfig& config) {
  json out = json::object();
  for (const auto& [key, field] : registry()) {
    const auto dot = key.find('.');
    out[key.substr(0, dot)][key.substr(dot + 1)] = field.get(config);
  }
  return out;
}

std::string to_ini(const ExperimentConfig& config) {
  std::string out;
  std::string current;
  for (const auto& [key, field] : registry()) {
    const auto dot = key.find('.');
    const auto section = key.substr(0, dot);
    if (section != current) {
      out += (current.empty() ? "" : "\n") + ("[" + section + "]\n");
      current = section;
    }
    out += key.substr(dot + 1) + " = " + field.text(config) + "\n";
  }
  return out;
}

}  // namespace nestco::pipeline
