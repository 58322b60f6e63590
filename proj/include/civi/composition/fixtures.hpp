#pragma once

#include <functional>
#include <optional>

#include "civi/composition/problem.hpp"

namespace civi::composition {

/// log g_{e,k}(theta) = (A theta)_k + s_k(theta) * e_k with
/// s_k = sigma * exp((B theta)_k) and e ~ N(0, I_n). With B = 0 this is
/// g = exp(A theta + e). The inner mean is exp((A theta)_k + s_k^2 / 2),
/// so loss and gradient are available in closed form.
class LognormalProblem final : public CompositionalProblem {
 public:
  LognormalProblem(Matrix a, Matrix b, double sigma);

  /// A = -I, B = I, sigma = 1 in n dimensions. Optimum theta = 0, loss 1/2.
  static LognormalProblem standard(Index n);

  [[nodiscard]] Index pool_size() const override { return a_.rows(); }
  [[nodiscard]] Index param_dim() const override { return a_.cols(); }
  [[nodiscard]] Index draw_dim() const override { return a_.rows(); }
  [[nodiscard]] Matrix sample_draws(Index count, std::mt19937_64& rng) const override;
  [[nodiscard]] Matrix log_values(const Vector& theta, const Matrix& draws,
                                  const Columns& cols) const override;
  [[nodiscard]] Vector log_value_gradient(const Vector& theta, const Vector& draw,
                                          Index k) const override;
  [[nodiscard]] Vector contract(const Vector& theta, const Matrix& draws, const Columns& cols,
                                const Vector& weights) const override;
  [[nodiscard]] std::optional<double> exact_loss(const Vector& theta) const override;
  [[nodiscard]] std::optional<Vector> exact_gradient(const Vector& theta) const override;

  /// Exact log inner mean, length n.
  [[nodiscard]] Vector exact_log_mean(const Vector& theta) const;

 private:
  Matrix a_;
  Matrix b_;
  double sigma_;
};

/// Problem defined by linear-domain callbacks g(theta, draw) in R^n and
/// its n x p Jacobian. Draws are standard normal of length draw_dim
/// (zero-length draws make the problem deterministic).
class FunctionProblem final : public CompositionalProblem {
 public:
  using ValueFn = std::function<Vector(const Vector& theta, const Vector& draw)>;
  using JacobianFn = std::function<Matrix(const Vector& theta, const Vector& draw)>;

  FunctionProblem(Index n, Index p, Index draw_dim, ValueFn value, JacobianFn jacobian);

  [[nodiscard]] Index pool_size() const override { return n_; }
  [[nodiscard]] Index param_dim() const override { return p_; }
  [[nodiscard]] Index draw_dim() const override { return draw_dim_; }
  [[nodiscard]] Matrix sample_draws(Index count, std::mt19937_64& rng) const override;
  [[nodiscard]] Matrix log_values(const Vector& theta, const Matrix& draws,
                                  const Columns& cols) const override;
  [[nodiscard]] Vector log_value_gradient(const Vector& theta, const Vector& draw,
                                          Index k) const override;

 private:
  Index n_;
  Index p_;
  Index draw_dim_;
  ValueFn value_;
  JacobianFn jacobian_;
};

/// Forwards to another problem and counts Jacobian column touches in
/// contract(): one touch per (column, draw) pair. Value requests are
/// counted separately.
class CountingProblem final : public CompositionalProblem {
 public:
  explicit CountingProblem(const CompositionalProblem& inner) : inner_(&inner) {}

  [[nodiscard]] Index pool_size() const override { return inner_->pool_size(); }
  [[nodiscard]] Index param_dim() const override { return inner_->param_dim(); }
  [[nodiscard]] Index draw_dim() const override { return inner_->draw_dim(); }
  [[nodiscard]] Matrix sample_draws(Index count, std::mt19937_64& rng) const override {
    return inner_->sample_draws(count, rng);
  }
  [[nodiscard]] Matrix log_values(const Vector& theta, const Matrix& draws,
                                  const Columns& cols) const override {
    values_ += static_cast<long long>(cols.size()) * draws.cols();
    return inner_->log_values(theta, draws, cols);
  }
  [[nodiscard]] Vector log_value_gradient(const Vector& theta, const Vector& draw,
                                          Index k) const override {
    touches_ += 1;
    return inner_->log_value_gradient(theta, draw, k);
  }
  [[nodiscard]] Vector contract(const Vector& theta, const Matrix& draws, const Columns& cols,
                                const Vector& weights) const override {
    touches_ += static_cast<long long>(cols.size()) * draws.cols();
    return inner_->contract(theta, draws, cols, weights);
  }

  [[nodiscard]] std::optional<double> exact_loss(const Vector& theta) const override {
    return inner_->exact_loss(theta);
  }
  [[nodiscard]] std::optional<Vector> exact_gradient(const Vector& theta) const override {
    return inner_->exact_gradient(theta);
  }

  [[nodiscard]] long long touches() const { return touches_; }
  /// Column-draw pairs whose value was requested through log_values.
  [[nodiscard]] long long values() const { return values_; }
  void reset() {
    touches_ = 0;
    values_ = 0;
  }

 private:
  const CompositionalProblem* inner_;
  mutable long long touches_ = 0;
  mutable long long values_ = 0;
};

}  // namespace civi::composition
