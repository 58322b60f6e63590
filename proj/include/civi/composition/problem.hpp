#pragma once

#include <optional>
#include <random>
#include <vector>

#include "civi/types.hpp"

namespace civi::composition {

using Columns = std::vector<Index>;

/// Objective L(theta) = (1/n) sum_k log gbar_k(theta), where
/// gbar_k = E_draw[g_{draw,k}(theta)] and the outer index k runs over a
/// fixed pool of size n. Every value crosses this interface in log scale.
class CompositionalProblem {
 public:
  virtual ~CompositionalProblem() = default;

  /// Outer dimension n.
  [[nodiscard]] virtual Index pool_size() const = 0;
  /// Parameter dimension p.
  [[nodiscard]] virtual Index param_dim() const = 0;
  /// Length of one inner draw.
  [[nodiscard]] virtual Index draw_dim() const = 0;

  /// `count` i.i.d. inner draws, one per column.
  [[nodiscard]] virtual Matrix sample_draws(Index count, std::mt19937_64& rng) const = 0;

  /// log g_{draw,k}(theta) for k in `cols`; result is |cols| x draws.cols().
  [[nodiscard]] virtual Matrix log_values(const Vector& theta, const Matrix& draws,
                                          const Columns& cols) const = 0;

  /// Gradient of log g_{draw,k} with respect to theta for a single draw.
  [[nodiscard]] virtual Vector log_value_gradient(const Vector& theta, const Vector& draw,
                                                  Index k) const = 0;

  /// sum_i w_i * grad log gbar_{cols[i]}(theta), with gbar the mean over
  /// `draws`. The default goes column by column through
  /// log_value_gradient; models with a shared graph override it.
  [[nodiscard]] virtual Vector contract(const Vector& theta, const Matrix& draws,
                                        const Columns& cols, const Vector& weights) const;

  /// Closed-form loss and gradient when the inner mean is known exactly.
  [[nodiscard]] virtual std::optional<double> exact_loss(const Vector&) const { return {}; }
  [[nodiscard]] virtual std::optional<Vector> exact_gradient(const Vector&) const { return {}; }

  /// [0, n).
  [[nodiscard]] Columns all_columns() const;
};

/// Row-wise log-mean-exp of a log-value matrix: log((1/K) sum_j exp(x_ij)).
Vector log_mean_rows(const Matrix& log_values);

/// Checks theta length and weight/column agreement; throws DimensionError.
void check_contract_args(const CompositionalProblem& problem, const Vector& theta,
                         const Columns& cols, const Vector& weights);

}  // namespace civi::composition
