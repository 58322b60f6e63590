#include "civi/composition/problem.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace civi::composition {

Columns CompositionalProblem::all_columns() const {
  Columns cols(static_cast<std::size_t>(pool_size()));
  std::iota(cols.begin(), cols.end(), Index{0});
  return cols;
}

Vector log_mean_rows(const Matrix& log_values) {
  if (log_values.cols() == 0) {
    throw DimensionError("log_mean_rows: no draws");
  }
  const Vector hi = log_values.rowwise().maxCoeff();
  const Vector s = (log_values.colwise() - hi).array().exp().rowwise().sum();
  return hi.array() + s.array().log() - std::log(static_cast<double>(log_values.cols()));
}

void check_contract_args(const CompositionalProblem& problem, const Vector& theta,
                         const Columns& cols, const Vector& weights) {
  if (theta.size() != problem.param_dim()) {
    throw DimensionError("contract: theta has length " + std::to_string(theta.size()) +
                         ", problem expects " + std::to_string(problem.param_dim()));
  }
  if (static_cast<Index>(cols.size()) != weights.size()) {
    throw DimensionError("contract: " + std::to_string(cols.size()) + " columns but " +
                         std::to_string(weights.size()) + " weights");
  }
  for (Index k : cols) {
    if (k < 0 || k >= problem.pool_size()) {
      throw DimensionError("contract: column " + std::to_string(k) + " outside the pool");
    }
  }
}

Vector CompositionalProblem::contract(const Vector& theta, const Matrix& draws, const Columns& cols,
                                      const Vector& weights) const {
  check_contract_args(*this, theta, cols, weights);
  Vector out = Vector::Zero(param_dim());
  if (cols.empty()) {
    return out;
  }
  const Matrix lv = log_values(theta, draws, cols);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (weights(static_cast<Index>(i)) == 0.0) {
      continue;
    }
    // grad log gbar_k = sum_j softmax_j(log g_jk) * grad log g_jk.
    const auto row = lv.row(static_cast<Index>(i));
    const double hi = row.maxCoeff();
    const Eigen::RowVectorXd w = (row.array() - hi).exp();
    const double total = w.sum();
    Vector g = Vector::Zero(param_dim());
    for (Index j = 0; j < draws.cols(); ++j) {
      g += (w(j) / total) * log_value_gradient(theta, draws.col(j), cols[i]);
    }
    out += weights(static_cast<Index>(i)) * g;
  }
  return out;
}

}  // namespace civi::composition
