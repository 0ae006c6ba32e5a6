#include "nestco/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nestco/error.hpp"
#include "nestco/random.hpp"

namespace nestco::data {

void RegressionDataset::validate() const {
  if (y.size() != x.size() || truth.size() != x.size()) {
    throw ValidationError("regression dataset: x, y and truth lengths differ");
  }
  if (!std::is_sorted(x.begin(), x.end())) {
    throw ValidationError("regression dataset: x must be sorted ascending");
  }
}

double NoisyClassificationDataset::noise_rate() const {
  if (size() == 0) return 0.0;
  const auto clean = std::count(clean_flags.begin(), clean_flags.end(), std::uint8_t{1});
  return 1.0 - static_cast<double>(clean) / static_cast<double>(size());
}

void NoisyClassificationDataset::validate() const {
  const auto n = noisy_labels.size();
  if (dim == 0) throw ValidationError("dataset: feature dimension must be positive");
  if (class_count < 2) throw ValidationError("dataset: need at least two classes");
  if (features.size() != n * dim || true_labels.size() != n || clean_flags.size() != n) {
    throw ValidationError("dataset: features, labels and flags disagree on the sample count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int label : {noisy_labels[i], true_labels[i]}) {
      if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
        throw ValidationError("dataset: label " + std::to_string(label) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(class_count) +
                              ")");
      }
    }
    if ((clean_flags[i] != 0) != (noisy_labels[i] == true_labels[i])) {
      throw ValidationError("dataset: clean flag at row " + std::to_string(i) +
                            " disagrees with its labels");
    }
  }
}

void NoisyClassificationDataset::refresh_flags() {
  clean_flags.resize(noisy_labels.size());
  for (std::size_t i = 0; i < noisy_labels.size(); ++i) {
    clean_flags[i] = noisy_labels[i] == true_labels[i] ? 1 : 0;
  }
}

NoisyClassificationDataset NoisyClassificationDataset::subset(
    std::span<const std::size_t> indices) const {
  NoisyClassificationDataset out;
  out.dim = dim;
  out.class_count = class_count;
  out.features.reserve(indices.size() * dim);
  for (auto i : indices) {
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.noisy_labels.push_back(noisy_labels[i]);
    out.true_labels.push_back(true_labels[i]);
    out.clean_flags.push_back(clean_flags[i]);
  }
  return out;
}

RegressionDataset gen_toy_regression(std::size_t n, double lo, double hi, double noise_std,
                                     std::uint64_t seed) {
  if (n < 2) throw ValidationError("toy regression needs n >= 2");
  if (!(lo < hi)) throw ValidationError("toy regression needs lo < hi");
  if (!(noise_std >= 0.0)) throw ValidationError("noise standard deviation must be >= 0");
  Rng rng(seed);
  RegressionDataset ds;
  ds.x.resize(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) ds.x[i] = lo + step * static_cast<double>(i);
  ds.x.back() = hi;
  ds.truth = ds.x;
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.y[i] = noise_std == 0.0 ? ds.x[i] : ds.x[i] + noise_std * standard_normal(rng);
  }
  return ds;
}

NoisyClassificationDataset gen_gaussian_blobs(std::size_t n, std::size_t classes, std::size_t dim,
                                              double separation, std::uint64_t seed) {
  if (classes < 2) throw ValidationError("blobs: need at least two classes");
  if (n < classes) throw ValidationError("blobs: need at least one sample per class");
  if (dim < 1) throw ValidationError("blobs: dimension must be >= 1");
  if (!(separation > 0.0)) throw ValidationError("blobs: separation must be positive");

  Rng rng(seed);
  std::vector<double> means(classes * dim);
  // A mean closer than `separation` to an earlier one is redrawn, a bounded
  // number of times; in one dimension this makes two classes antipodal.
  const auto too_close = [&](std::size_t c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = means[c * dim + j] - means[prev * dim + j];
        d2 += d * d;
      }
      if (d2 < separation * separation) return true;
    }
    return false;
  };
  for (std::size_t c = 0; c < classes; ++c) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      double norm = 0.0;
      do {
        norm = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          means[c * dim + j] = standard_normal(rng);
          norm += means[c * dim + j] * means[c * dim + j];
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < dim; ++j) means[c * dim + j] *= separation / norm;
      if (!too_close(c)) break;
    }
  }

  NoisyClassificationDataset ds;
  ds.dim = dim;
  ds.class_count = classes;
  ds.true_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.true_labels[i] = static_cast<int>(i % classes);
  shuffle(ds.true_labels, rng);
  ds.features.resize(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(ds.true_labels[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      ds.features[i * dim + j] = means[c * dim + j] + standard_normal(rng);
    }
  }
  ds.noisy_labels = ds.true_labels;
  ds.clean_flags.assign(n, 1);
  return ds;
}

namespace {

void check_rate(double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw ValidationError("noise rate must lie in [0, 1), got " + std::to_string(eta));
  }
}

}  // namespace

NoisyClassificationDataset inject_symmetric_noise(NoisyClassificationDataset ds, double eta,
                                                  std::uint64_t seed) {
  check_rate(eta);
  ds.validate();
  Rng rng(seed);
  const auto classes = ds.class_count;
  for (auto& label : ds.noisy_labels) {
    if (uniform01(rng) >= eta) continue;
    auto other = static_cast<int>(uniform_index(rng, classes - 1));
    if (other >= label) ++other;
    label = other;
  }
  ds.refresh_flags();
  return ds;
}

NoisyClassificationDataset inject_pairflip_noise(NoisyClassificationDataset ds, double eta,
                                                 std::uint64_t seed) {
  check_rate(eta);
  ds.validate();
  Rng rng(seed);
  const auto classes = static_cast<int>(ds.class_count);
  for (auto& label : ds.noisy_labels) {
    if (uniform01(rng) >= eta) continue;
    label = (label + 1) % classes;
  }
  ds.refresh_flags();
  return ds;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ValidationError("split fractions must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
}

std::tuple<std::vector<std::size_t>, std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(const NoisyClassificationDataset& ds, const SplitSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const double fractions[3] = {spec.train, spec.val, spec.test};

  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.true_labels[i])].push_back(i);
  }

  std::vector<std::size_t> parts[3];
  double seen = 0.0;
  double assigned[3] = {0.0, 0.0, 0.0};
  for (auto& members : by_class) {
    shuffle(members, rng);
    const auto n = members.size();
    std::size_t counts[3];
    double remainder[3];
    std::size_t used = 0;
    for (int s = 0; s < 3; ++s) {
      const double share = fractions[s] * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(std::floor(share + 1e-9));
      remainder[s] = share - static_cast<double>(counts[s]);
      used += counts[s];
    }
    // Leftover samples go to the splits furthest behind their overall target.
    seen += static_cast<double>(n);
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) {
      const double da = remainder[a] + fractions[a] * seen - assigned[a] - static_cast<double>(counts[a]);
      const double db = remainder[b] + fractions[b] * seen - assigned[b] - static_cast<double>(counts[b]);
      return da != db ? da > db : a < b;
    });
    for (std::size_t extra = 0; used + extra < n; ++extra) ++counts[order[extra % 3]];

    std::size_t cursor = 0;
    for (int s = 0; s < 3; ++s) {
      parts[s].insert(parts[s].end(), members.begin() + static_cast<std::ptrdiff_t>(cursor),
                      members.begin() + static_cast<std::ptrdiff_t>(cursor + counts[s]));
      cursor += counts[s];
      assigned[s] += static_cast<double>(counts[s]);
    }
  }
  const char* names[3] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    if (parts[s].empty()) {
      throw ValidationError(std::string("split: the ") + names[s] + " split would be empty");
    }
    shuffle(parts[s], rng);
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

Splits split(const NoisyClassificationDataset& ds, const SplitSpec& spec) {
  auto [train, val, test] = split_indices(ds, spec);
  return Splits{ds.subset(train), ds.subset(val), ds.subset(test)};
}

}  // namespace nestco::data
