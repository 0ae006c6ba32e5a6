#pragma once

#include <filesystem>

#include "nestco/datasets.hpp"

namespace nestco::data {

// File layout:
//   line 1   "# nestco-dataset kind=classification classes=<C> dim=<d>"
//            or "# nestco-dataset kind=regression"
//   line 2   header: f0,...,f{d-1},noisy_label,true_label  |  x,y,truth
//   line 3+  one sample per row; reals printed with 17 significant digits.

void save_csv(const NoisyClassificationDataset& ds, const std::filesystem::path& path);
void save_csv(const RegressionDataset& ds, const std::filesystem::path& path);

/// Throws ParseError (with line number) on malformed content and
/// ValidationError when labels fall outside [0, classes).
NoisyClassificationDataset load_classification_csv(const std::filesystem::path& path);
RegressionDataset load_regression_csv(const std::filesystem::path& path);

}  // namespace nestco::data
