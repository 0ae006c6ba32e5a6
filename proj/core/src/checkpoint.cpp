#include "nestco/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "nestco/error.hpp"

namespace nestco::io {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "nestco-checkpoint";
constexpr int kVersion = 1;

const json& field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ParseError(std::string("checkpoint: missing field '") + key + "'", 0);
  }
  return doc.at(key);
}

std::vector<double> doubles(const json& doc, const char* key, std::size_t expected) {
  auto v = field(doc, key).get<std::vector<double>>();
  if (v.size() != expected) {
    throw ValidationError(std::string("checkpoint: '") + key + "' holds " +
                          std::to_string(v.size()) + " values, expected " +
                          std::to_string(expected));
  }
  return v;
}

}  // namespace

json to_json(const nn::Mlp& model) {
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, nn::Linear>) {
            layers.push_back({{"type", "linear"},
                              {"in", l.in},
                              {"out", l.out},
                              {"weight", l.weight},
                              {"bias", l.bias}});
          } else if constexpr (std::is_same_v<T, nn::Relu>) {
            layers.push_back({{"type", "relu"}});
          } else {
            layers.push_back({{"type", "batchnorm"},
                              {"dim", l.dim},
                              {"gamma", l.gamma},
                              {"beta", l.beta},
                              {"running_mean", l.running_mean},
                              {"running_var", l.running_var},
                              {"momentum", l.momentum},
                              {"eps", l.eps},
                              {"frozen", l.frozen}});
          }
        },
        layer);
  }
  return {{"layers", layers}, {"nested_positions", model.nested_positions()}};
}

nn::Mlp mlp_from_json(const json& doc) {
  std::vector<nn::Layer> layers;
  for (const auto& l : field(doc, "layers")) {
    const auto type = field(l, "type").get<std::string>();
    if (type == "linear") {
      nn::Linear lin;
      lin.in = field(l, "in").get<std::size_t>();
      lin.out = field(l, "out").get<std::size_t>();
      lin.weight = doubles(l, "weight", lin.in * lin.out);
      lin.bias = doubles(l, "bias", lin.out);
      layers.emplace_back(std::move(lin));
    } else if (type == "relu") {
      layers.emplace_back(nn::Relu{});
    } else if (type == "batchnorm") {
      nn::BatchNorm1d bn;
      bn.dim = field(l, "dim").get<std::size_t>();
      bn.gamma = doubles(l, "gamma", bn.dim);
      bn.beta = doubles(l, "beta", bn.dim);
      bn.running_mean = doubles(l, "running_mean", bn.dim);
      bn.running_var = doubles(l, "running_var", bn.dim);
      bn.momentum = field(l, "momentum").get<double>();
      bn.eps = field(l, "eps").get<double>();
      bn.frozen = field(l, "frozen").get<bool>();
      layers.emplace_back(std::move(bn));
    } else {
      throw ParseError("checkpoint: unknown layer type '" + type + "'", 0);
    }
  }
  auto positions = field(doc, "nested_positions").get<std::set<std::size_t>>();
  return nn::Mlp(std::move(layers), std::move(positions));
}

json to_json(const nn::SgdState& state) { return {{"velocity", state.velocity}}; }

nn::SgdState sgd_state_from_json(const json& doc) {
  nn::SgdState state;
  state.velocity = field(doc, "velocity").get<std::vector<std::vector<double>>>();
  return state;
}

json to_json(const Checkpoint& ckpt) {
  return {{"format", kFormat},
          {"version", kVersion},
          {"model", to_json(ckpt.model)},
          {"optimizer", to_json(ckpt.optimizer)},
          {"cursor",
           {{"epoch", ckpt.cursor.epoch},
            {"iteration", ckpt.cursor.iteration},
            {"rng", serialize_rng(ckpt.cursor.rng)}}},
          {"config", ckpt.config}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (field(doc, "format") != kFormat) throw ParseError("not a nestco checkpoint", 0);
  if (field(doc, "version") != kVersion) {
    throw ParseError("unsupported checkpoint version " + field(doc, "version").dump(), 0);
  }
  Checkpoint ckpt;
  ckpt.model = mlp_from_json(field(doc, "model"));
  ckpt.optimizer = sgd_state_from_json(field(doc, "optimizer"));
  const auto& cursor = field(doc, "cursor");
  ckpt.cursor.epoch = field(cursor, "epoch").get<std::size_t>();
  ckpt.cursor.iteration = field(cursor, "iteration").get<std::size_t>();
  ckpt.cursor.rng = deserialize_rng(field(cursor, "rng").get<std::string>());
  ckpt.config = field(doc, "config");
  const auto params = ckpt.model.parameter_count();
  std::size_t velocity = 0;
  for (const auto& v : ckpt.optimizer.velocity) velocity += v.size();
  if (velocity != 0 && velocity != params) {
    throw ValidationError("checkpoint: optimizer state does not match the model parameters");
  }
  return ckpt;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text(path, to_json(ckpt).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  try {
    return checkpoint_from_json(doc);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace nestco::io
