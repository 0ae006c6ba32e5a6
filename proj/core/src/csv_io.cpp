#include "nestco/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nestco/error.hpp"

namespace nestco::data {

namespace {

std::string format_real(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError("expected a real number, got '" + std::string(field) + "'", line);
  }
  return v;
}

long parse_int(std::string_view field, std::size_t line) {
  long v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError("expected an integer, got '" + std::string(field) + "'", line);
  }
  return v;
}

struct RawFile {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::string> rows;
  std::size_t first_row_line = 3;
};

RawFile read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  RawFile raw;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  if (!line.starts_with("# nestco-dataset")) {
    throw ParseError("missing '# nestco-dataset' metadata line", 1);
  }
  std::istringstream meta(line.substr(16));
  std::string token;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("bad metadata token '" + token + "'", 1);
    raw.meta[token.substr(0, eq)] = token.substr(eq + 1);
  }
  if (!std::getline(in, line)) throw ParseError("missing header row", 2);
  for (auto f : split_fields(line)) raw.header.emplace_back(f);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    raw.rows.push_back(line);
  }
  return raw;
}

std::string require_meta(const RawFile& raw, const std::string& key) {
  const auto it = raw.meta.find(key);
  if (it == raw.meta.end()) throw ParseError("metadata is missing '" + key + "'", 1);
  return it->second;
}

void write_or_throw(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

void save_csv(const NoisyClassificationDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path.string());
  out << "# nestco-dataset kind=classification classes=" << ds.class_count << " dim=" << ds.dim
      << '\n';
  for (std::size_t j = 0; j < ds.dim; ++j) out << 'f' << j << ',';
  out << "noisy_label,true_label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) out << format_real(v) << ',';
    out << ds.noisy_labels[i] << ',' << ds.true_labels[i] << '\n';
  }
  write_or_throw(out, path);
}

void save_csv(const RegressionDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path.string());
  out << "# nestco-dataset kind=regression\n";
  out << "x,y,truth\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << format_real(ds.x[i]) << ',' << format_real(ds.y[i]) << ',' << format_real(ds.truth[i])
        << '\n';
  }
  write_or_throw(out, path);
}

NoisyClassificationDataset load_classification_csv(const std::filesystem::path& path) {
  const auto raw = read_file(path);
  if (require_meta(raw, "kind") != "classification") {
    throw ParseError("expected kind=classification", 1);
  }
  NoisyClassificationDataset ds;
  ds.class_count = static_cast<std::size_t>(parse_int(require_meta(raw, "classes"), 1));
  ds.dim = static_cast<std::size_t>(parse_int(require_meta(raw, "dim"), 1));
  if (raw.header.size() != ds.dim + 2) {
    throw ParseError("header has " + std::to_string(raw.header.size()) + " columns, expected " +
                         std::to_string(ds.dim + 2),
                     2);
  }
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto line = raw.first_row_line + r;
    const auto fields = split_fields(raw.rows[r]);
    if (fields.size() != ds.dim + 2) {
      throw ParseError("expected " + std::to_string(ds.dim + 2) + " fields, got " +
                           std::to_string(fields.size()),
                       line);
    }
    for (std::size_t j = 0; j < ds.dim; ++j) ds.features.push_back(parse_real(fields[j], line));
    const auto noisy = parse_int(fields[ds.dim], line);
    const auto truth = parse_int(fields[ds.dim + 1], line);
    for (long label : {noisy, truth}) {
      if (label < 0 || static_cast<std::size_t>(label) >= ds.class_count) {
        throw ValidationError("line " + std::to_string(line) + ": label " + std::to_string(label) +
                              " outside [0, " + std::to_string(ds.class_count) + ")");
      }
    }
    ds.noisy_labels.push_back(static_cast<int>(noisy));
    ds.true_labels.push_back(static_cast<int>(truth));
  }
  if (ds.noisy_labels.empty()) throw ParseError("no samples in " + path.string(), 3);
  ds.refresh_flags();
  ds.validate();
  return ds;
}

RegressionDataset load_regression_csv(const std::filesystem::path& path) {
  const auto raw = read_file(path);
  if (require_meta(raw, "kind") != "regression") throw ParseError("expected kind=regression", 1);
  if (raw.header.size() != 3) throw ParseError("regression header must be x,y,truth", 2);
  RegressionDataset ds;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto line = raw.first_row_line + r;
    const auto fields = split_fields(raw.rows[r]);
    if (fields.size() != 3) throw ParseError("expected 3 fields", line);
    ds.x.push_back(parse_real(fields[0], line));
    ds.y.push_back(parse_real(fields[1], line));
    ds.truth.push_back(parse_real(fields[2], line));
  }
  if (ds.x.empty()) throw ParseError("no samples in " + path.string(), 3);
  ds.validate();
  return ds;
}

}  // namespace nestco::data
