#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>

#include "civi/diffcore/ops.hpp"
#include "civi/sivi/target.hpp"

namespace civi::sivi {

/// Binary classification data for Bayesian logistic regression.
struct BlrDataset {
  Matrix features;  // N x D
  Vector labels;    // N, entries 0 or 1
  double prior_variance = 100.0;

  [[nodiscard]] Index size() const { return features.rows(); }
  [[nodiscard]] Index dim() const { return features.cols(); }
  /// Throws ConfigError on shape mismatch, non-binary labels or non-finite features.
  void validate() const;
};

/// Headerless CSV, label in the last column. Features are standardized to
/// zero mean and unit variance when `standardize` is set.
BlrDataset load_blr_csv(const std::filesystem::path& path, bool standardize = true);
void write_blr_csv(const BlrDataset& data, const std::filesystem::path& path);

/// Per-column zero mean and unit variance; constant columns are only centred.
void standardize_features(BlrDataset& data);

/// Gaussian features, weights z* ~ N(0, I), labels ~ Bernoulli(sigmoid(x^T z*)).
BlrDataset synthesize_blr(Index n, Index d, std::uint64_t seed);

/// log sigmoid(a), stable for large |a|.
double log_sigmoid(double a);

/// log N(z; 0, prior_variance I) + sum_i log Bernoulli(y_i; sigmoid(x_i^T z)), with gradient.
diffcore::ValueGrad blr_log_joint(const BlrDataset& data, const Vector& z);

/// Target wrapping blr_log_joint; the dataset is shared, not copied per call.
TargetDensity make_blr_target(std::shared_ptr<const BlrDataset> data);

}  // namespace civi::sivi
