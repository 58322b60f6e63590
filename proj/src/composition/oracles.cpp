#include "civi/composition/oracles.hpp"

#include <cmath>
#include <string>

namespace civi::composition {

OracleFBatch OracleFBatch::from_indices(std::vector<Index> indices, const Vector& log_y) {
  OracleFBatch batch;
  batch.inv_y_.resize(static_cast<Index>(indices.size()));
  for (std::size_t a = 0; a < indices.size(); ++a) {
    const Index nu = indices[a];
    if (nu < 0 || nu >= log_y.size()) {
      throw DimensionError("OracleFBatch: index " + std::to_string(nu) + " outside [0, " +
                           std::to_string(log_y.size()) + ")");
    }
    if (!std::isfinite(log_y(nu))) {
      throw NumericError("OracleFBatch: log y is not finite at index " + std::to_string(nu));
    }
    batch.inv_y_(static_cast<Index>(a)) = std::exp(-log_y(nu));
  }
  batch.indices_ = std::move(indices);
  return batch;
}

std::vector<Index> OracleFBatch::counts(Index n) const {
  std::vector<Index> c(static_cast<std::size_t>(n), 0);
  for (Index nu : indices_) {
    if (nu >= n) {
      throw DimensionError("OracleFBatch::counts: index beyond n");
    }
    ++c[static_cast<std::size_t>(nu)];
  }
  return c;
}

Vector OracleFBatch::mean_gradient(Index n) const {
  Vector g = Vector::Zero(n);
  for (std::size_t a = 0; a < indices_.size(); ++a) {
    g(indices_[a]) += inv_y_(static_cast<Index>(a));
  }
  return g / static_cast<double>(indices_.size());
}

OracleGBatch::OracleGBatch(const CompositionalProblem& problem, Vector point, Matrix draws)
    : problem_(&problem), point_(std::move(point)), draws_(std::move(draws)) {
  if (point_.size() != problem.param_dim()) {
    throw DimensionError("OracleGBatch: point has length " + std::to_string(point_.size()) +
                         ", problem expects " + std::to_string(problem.param_dim()));
  }
  if (draws_.cols() < 1) {
    throw DimensionError("OracleGBatch: at least one draw is required");
  }
}

Matrix OracleGBatch::log_values(const Columns& cols) const {
  Matrix lv = problem_->log_values(point_, draws_, cols);
  for (Index j = 0; j < lv.cols(); ++j) {
    if (!lv.col(j).allFinite()) {
      throw NumericError("oracle_g: non-finite log value for draw " + std::to_string(j));
    }
  }
  return lv;
}

Vector OracleGBatch::log_mean(const Columns& cols) const { return log_mean_rows(log_values(cols)); }

Vector OracleGBatch::contract(const Columns& cols, const Vector& weights) const {
  return problem_->contract(point_, draws_, cols, weights);
}

Vector OracleGBatch::jacobian_column(Index k) const {
  const Columns one{k};
  const double gbar = std::exp(log_mean(one)(0));
  return gbar * contract(one, Vector::Ones(1));
}

Matrix OracleGBatch::mean_jacobian() const {
  const Index n = problem_->pool_size();
  Matrix j(n, problem_->param_dim());
  for (Index k = 0; k < n; ++k) {
    j.row(k) = jacobian_column(k).transpose();
  }
  return j;
}

OracleFBatch oracle_f(const Vector& log_y, Index k, const Columns& support, std::mt19937_64& rng) {
  if (k < 1) {
    throw ConfigError("oracle_f: batch size must be at least 1");
  }
  if (support.empty()) {
    throw ConfigError("oracle_f: empty support");
  }
  std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (auto& i : idx) {
    i = support[pick(rng)];
  }
  return OracleFBatch::from_indices(std::move(idx), log_y);
}

OracleFBatch oracle_f(const Vector& log_y, Index k, std::mt19937_64& rng) {
  Columns all(static_cast<std::size_t>(log_y.size()));
  for (Index i = 0; i < log_y.size(); ++i) {
    all[static_cast<std::size_t>(i)] = i;
  }
  return oracle_f(log_y, k, all, rng);
}

OracleGBatch oracle_g(const CompositionalProblem& problem, const Vector& point, Index k,
                      std::mt19937_64& rng) {
  if (k < 1) {
    throw ConfigError("oracle_g: batch size must be at least 1");
  }
  return OracleGBatch(problem, point, problem.sample_draws(k, rng));
}

ReferenceGradient reference_gradient(const CompositionalProblem& problem, const Vector& theta,
                                     Index k_ref, std::mt19937_64& rng) {
  const OracleGBatch batch = oracle_g(problem, theta, k_ref, rng);
  const Columns cols = problem.all_columns();
  const Index n = problem.pool_size();
  ReferenceGradient out;
  out.loss = batch.log_mean(cols).mean();
  out.gradient = batch.contract(cols, Vector::Constant(n, 1.0 / static_cast<double>(n)));
  out.low_sample_warning = k_ref < 1000;
  return out;
}

}  // namespace civi::composition
