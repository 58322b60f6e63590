#pragma once

#include <random>
#include <vector>

#include "civi/composition/problem.hpp"

namespace civi::composition {

/// K outer indices with their gradients e_nu / y_nu, held sparsely.
class OracleFBatch {
 public:
  /// Builds a batch from explicit indices; `log_y` is the full length-n vector.
  static OracleFBatch from_indices(std::vector<Index> indices, const Vector& log_y);

  [[nodiscard]] const std::vector<Index>& indices() const { return indices_; }
  [[nodiscard]] Index size() const { return static_cast<Index>(indices_.size()); }
  /// 1 / y at each sampled index, computed as exp(-log y).
  [[nodiscard]] const Vector& gradient_values() const { return inv_y_; }
  /// Hit count per pool index, length n.
  [[nodiscard]] std::vector<Index> counts(Index n) const;
  /// (1/K) sum_a e_{nu_a} / y_{nu_a} as a dense length-n vector.
  [[nodiscard]] Vector mean_gradient(Index n) const;

 private:
  std::vector<Index> indices_;
  Vector inv_y_;
};

/// K inner draws at a fixed point, with lazy access to values and
/// Jacobian columns of the Monte-Carlo mean gbar.
class OracleGBatch {
 public:
  OracleGBatch(const CompositionalProblem& problem, Vector point, Matrix draws);

  [[nodiscard]] const CompositionalProblem& problem() const { return *problem_; }
  [[nodiscard]] const Vector& point() const { return point_; }
  [[nodiscard]] const Matrix& draws() const { return draws_; }
  [[nodiscard]] Index size() const { return draws_.cols(); }

  /// log g per draw, |cols| x K.
  [[nodiscard]] Matrix log_values(const Columns& cols) const;
  /// log gbar over the draws for each column.
  [[nodiscard]] Vector log_mean(const Columns& cols) const;
  /// sum_i w_i * grad log gbar_{cols[i]}.
  [[nodiscard]] Vector contract(const Columns& cols, const Vector& weights) const;
  /// Linear-domain Jacobian column grad gbar_k (length p).
  [[nodiscard]] Vector jacobian_column(Index k) const;
  /// Full n x p Jacobian of gbar. Only for diagnostics and tests.
  [[nodiscard]] Matrix mean_jacobian() const;

 private:
  const CompositionalProblem* problem_;
  Vector point_;
  Matrix draws_;
};

/// K i.i.d. indices drawn uniformly from `support` (with replacement).
OracleFBatch oracle_f(const Vector& log_y, Index k, const Columns& support, std::mt19937_64& rng);
/// Same, over the whole pool.
OracleFBatch oracle_f(const Vector& log_y, Index k, std::mt19937_64& rng);

/// K i.i.d. inner draws at `point`.
OracleGBatch oracle_g(const CompositionalProblem& problem, const Vector& point, Index k,
                      std::mt19937_64& rng);

struct ReferenceGradient {
  Vector gradient;
  double loss = 0.0;
  /// Set when K_ref is below 1000 and the plug-in bias is not negligible.
  bool low_sample_warning = false;
};

/// Plug-in (1/n) sum_k grad log gbar_k with gbar over K_ref draws and the
/// outer sum taken exactly.
ReferenceGradient reference_gradient(const CompositionalProblem& problem, const Vector& theta,
                                     Index k_ref, std::mt19937_64& rng);

}  // namespace civi::composition
