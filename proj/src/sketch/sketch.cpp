#include "civi/sketch/sketch.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

namespace civi::sketch {

SketchMode parse_sketch_mode(const std::string& name) {
  if (name == "uniform") return SketchMode::kUniform;
  if (name == "sparse") return SketchMode::kSparse;
  throw ConfigError("unknown sketch mode '" + name + "' (expected uniform or sparse)");
}

std::string to_string(SketchMode mode) { return mode == SketchMode::kSparse ? "sparse" : "uniform"; }

void SketchPlan::validate(Index n) const {
  if (d < 1 || d > n) {
    throw ConfigError("sketch size d_t = " + std::to_string(d) + " outside [1, " +
                      std::to_string(n) + "]");
  }
}

Vector SparseOuterGrad::weights() const { return log_weight.array().exp(); }

Vector SparseOuterGrad::dense() const {
  Vector out = Vector::Zero(n);
  const Vector w = weights();
  for (std::size_t i = 0; i < index.size(); ++i) out(index[i]) = w(static_cast<Index>(i));
  return out;
}

void batch_support(const composition::OracleFBatch& f, Columns& index, std::vector<Index>& count) {
  index.clear();
  count.clear();
  std::unordered_map<Index, std::size_t> slot;
  for (Index nu : f.indices()) {
    auto [it, fresh] = slot.emplace(nu, index.size());
    if (fresh) {
      index.push_back(nu);
      count.push_back(0);
    }
    ++count[it->second];
  }
}

SparseOuterGrad log_scale_combine(const Columns& index, const std::vector<Index>& count,
                                  const Vector& log_gbar, const Vector& log_y, Index k1, Index n) {
  if (index.size() != count.size() || static_cast<Index>(index.size()) != log_gbar.size()) {
    throw DimensionError("log_scale_combine: index, count and log_gbar lengths differ");
  }
  if (k1 < 1) {
    throw ConfigError("log_scale_combine: K1 must be at least 1");
  }
  if (log_y.size() != n) {
    throw DimensionError("log_scale_combine: log_y must have length n");
  }
  SparseOuterGrad out;
  out.n = n;
  std::vector<double> lw;
  const double log_k1 = std::log(static_cast<double>(k1));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (count[i] == 0) continue;
    const Index j = index[i];
    if (j < 0 || j >= n) {
      throw DimensionError("log_scale_combine: index " + std::to_string(j) + " outside [0, n)");
    }
    out.index.push_back(j);
    out.count.push_back(count[i]);
    lw.push_back(log_gbar(static_cast<Index>(i)) - log_k1 - log_y(j) +
                 std::log(static_cast<double>(count[i])));
  }
  out.log_weight = Eigen::Map<const Vector>(lw.data(), static_cast<Index>(lw.size()));
  return out;
}

SparseOuterGrad log_scale_combine(const composition::OracleFBatch& f, const Vector& log_gbar,
                                  const Vector& log_y, Index n) {
  Columns index;
  std::vector<Index> count;
  batch_support(f, index, count);
  return log_scale_combine(index, count, log_gbar, log_y, f.size(), n);
}

namespace {

/// sum_i scale * k_i * grad log gbar over the chosen support positions.
Vector contract_selected(const SparseOuterGrad& k, const std::vector<std::size_t>& positions,
                         const composition::OracleGBatch& g, double scale) {
  if (positions.empty()) return Vector::Zero(g.problem().param_dim());
  Columns cols;
  Vector w(static_cast<Index>(positions.size()));
  for (std::size_t i = 0; i < positions.size(); ++i) {
    cols.push_back(k.index[positions[i]]);
    w(static_cast<Index>(i)) = scale * std::exp(k.log_weight(static_cast<Index>(positions[i])));
  }
  return g.contract(cols, w);
}

}  // namespace

Vector sketch_gradient_subset(const composition::OracleFBatch& f,
                              const composition::OracleGBatch& g, const Vector& log_y,
                              const Columns& subset, double scale) {
  const Index n = g.problem().pool_size();
  if (subset.empty()) {
    throw ConfigError("sketch_gradient: empty subset");
  }
  Columns index;
  std::vector<Index> count;
  batch_support(f, index, count);
  std::unordered_map<Index, std::size_t> where;
  for (std::size_t i = 0; i < index.size(); ++i) where.emplace(index[i], i);
  // Only columns both in the subset and hit by f carry weight.
  Columns hit;
  std::vector<Index> hit_count;
  for (Index j : subset) {
    if (j < 0 || j >= n) {
      throw DimensionError("sketch_gradient: subset index " + std::to_string(j) + " outside [0, n)");
    }
    auto it = where.find(j);
    if (it == where.end()) continue;
    hit.push_back(j);
    hit_count.push_back(count[it->second]);
  }
  if (hit.empty()) return Vector::Zero(g.problem().param_dim());
  const Vector log_gbar = g.log_mean(hit);
  const SparseOuterGrad k = log_scale_combine(hit, hit_count, log_gbar, log_y, f.size(), n);
  std::vector<std::size_t> all(static_cast<std::size_t>(k.support_size()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return contract_selected(k, all, g, scale);
}

Columns sample_without_replacement(const Columns& pool, Index d, std::mt19937_64& rng) {
  if (d < 0 || d > static_cast<Index>(pool.size())) {
    throw ConfigError("sample_without_replacement: cannot draw " + std::to_string(d) + " of " +
                      std::to_string(pool.size()));
  }
  // Partial Fisher-Yates.
  Columns work = pool;
  for (Index i = 0; i < d; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), work.size() - 1);
    std::swap(work[static_cast<std::size_t>(i)], work[pick(rng)]);
  }
  work.resize(static_cast<std::size_t>(d));
  return work;
}

Vector sketch_gradient(const composition::OracleFBatch& f, const composition::OracleGBatch& g,
                       const Vector& log_y, const SketchPlan& plan, std::mt19937_64& rng) {
  const Index n = g.problem().pool_size();
  plan.validate(n);
  if (plan.mode == SketchMode::kSparse) {
    Columns index;
    std::vector<Index> count;
    batch_support(f, index, count);
    const SparseOuterGrad k = log_scale_combine(index, count, g.log_mean(index), log_y, f.size(), n);
    return sketch_gradient_sparse(k, g, plan, rng);
  }
  Columns subset;
  if (plan.d == n) {
    subset = g.problem().all_columns();
  } else {
    subset = sample_without_replacement(g.problem().all_columns(), plan.d, rng);
  }
  return sketch_gradient_subset(f, g, log_y, subset,
                                static_cast<double>(n) / static_cast<double>(plan.d));
}

Vector sketch_gradient_sparse(const SparseOuterGrad& k, const composition::OracleGBatch& g,
                              const SketchPlan& plan, std::mt19937_64& rng) {
  const Index support = k.support_size();
  if (support == 0) return Vector::Zero(g.problem().param_dim());
  const Index d = std::min(plan.d, support);
  std::vector<std::size_t> positions(static_cast<std::size_t>(support));
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  if (d < support) {
    for (Index i = 0; i < d; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), positions.size() - 1);
      std::swap(positions[static_cast<std::size_t>(i)], positions[pick(rng)]);
    }
    positions.resize(static_cast<std::size_t>(d));
  }
  return contract_selected(k, positions, g, static_cast<double>(support) / static_cast<double>(d));
}

}  // namespace civi::sketch
