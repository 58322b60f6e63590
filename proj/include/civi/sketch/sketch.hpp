#pragma once

#include <random>
#include <string>
#include <vector>

#include "civi/composition/oracles.hpp"

namespace civi::sketch {

using composition::Columns;

enum class SketchMode { kUniform, kSparse };

SketchMode parse_sketch_mode(const std::string& name);
std::string to_string(SketchMode mode);

/// Subset size and sampling mode for one sketched product.
struct SketchPlan {
  Index d = 1;
  SketchMode mode = SketchMode::kUniform;

  /// Throws ConfigError unless 1 <= d <= n.
  void validate(Index n) const;
};

/// Outer-gradient weights on the sampled support, held in log scale:
///   log k_j = log gbar_j - log K1 - log y_j + log count_j.
struct SparseOuterGrad {
  Index n = 0;
  Columns index;
  std::vector<Index> count;
  Vector log_weight;

  [[nodiscard]] Index support_size() const { return static_cast<Index>(index.size()); }
  /// exp(log_weight), one entry per support index.
  [[nodiscard]] Vector weights() const;
  /// Dense length-n vector of k.
  [[nodiscard]] Vector dense() const;
};

/// Distinct indices of the batch in first-hit order, with hit counts.
void batch_support(const composition::OracleFBatch& f, Columns& index, std::vector<Index>& count);

/// Builds k on the support of `f`. `log_gbar` holds log gbar for each
/// support index in the same order; `log_y` is the full length-n vector.
SparseOuterGrad log_scale_combine(const composition::OracleFBatch& f, const Vector& log_gbar,
                                  const Vector& log_y, Index n);
/// Same from explicit parts; entries with a zero count are dropped.
SparseOuterGrad log_scale_combine(const Columns& index, const std::vector<Index>& count,
                                  const Vector& log_gbar, const Vector& log_y, Index k1, Index n);

/// sum_{k in subset} scale * k_k * grad log gbar_k, where k is taken from
/// `f` and `log_y` and the Jacobian from `g`. Only subset columns that
/// were hit by `f` are touched.
Vector sketch_gradient_subset(const composition::OracleFBatch& f,
                              const composition::OracleGBatch& g, const Vector& log_y,
                              const Columns& subset, double scale);

/// Uniform mode: subset of d indices from [0, n) without replacement,
/// scale n / d. Sparse mode delegates to sketch_gradient_sparse.
Vector sketch_gradient(const composition::OracleFBatch& f, const composition::OracleGBatch& g,
                       const Vector& log_y, const SketchPlan& plan, std::mt19937_64& rng);

/// Subset of min(d, |support|) indices drawn from the support of `k`,
/// scale |support| / d'. Empty support gives zero.
Vector sketch_gradient_sparse(const SparseOuterGrad& k, const composition::OracleGBatch& g,
                              const SketchPlan& plan, std::mt19937_64& rng);

/// `d` distinct values from `pool` in sampled order.
Columns sample_without_replacement(const Columns& pool, Index d, std::mt19937_64& rng);

}  // namespace civi::sketch
