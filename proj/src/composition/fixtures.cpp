#include "civi/composition/fixtures.hpp"

#include <cmath>
#include <string>

namespace civi::composition {

LognormalProblem::LognormalProblem(Matrix a, Matrix b, double sigma)
    : a_(std::move(a)), b_(std::move(b)), sigma_(sigma) {
  if (a_.rows() < 1 || a_.cols() < 1) {
    throw DimensionError("LognormalProblem: A must be non-empty");
  }
  if (b_.rows() != a_.rows() || b_.cols() != a_.cols()) {
    throw DimensionError("LognormalProblem: A and B must have equal shapes");
  }
  if (!(sigma_ >= 0.0)) {
    throw ConfigError("LognormalProblem: sigma must be nonnegative");
  }
}

LognormalProblem LognormalProblem::standard(Index n) {
  return LognormalProblem(-Matrix::Identity(n, n), Matrix::Identity(n, n), 1.0);
}

Matrix LognormalProblem::sample_draws(Index count, std::mt19937_64& rng) const {
  std::normal_distribution<double> nd;
  Matrix d(draw_dim(), count);
  for (Index j = 0; j < count; ++j) {
    for (Index i = 0; i < d.rows(); ++i) {
      d(i, j) = nd(rng);
    }
  }
  return d;
}

Matrix LognormalProblem::log_values(const Vector& theta, const Matrix& draws,
                                    const Columns& cols) const {
  const Vector at = a_ * theta;
  const Vector s = sigma_ * (b_ * theta).array().exp();
  Matrix out(static_cast<Index>(cols.size()), draws.cols());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const Index k = cols[i];
    out.row(static_cast<Index>(i)) = (at(k) + s(k) * draws.row(k).array()).matrix();
  }
  return out;
}

Vector LognormalProblem::log_value_gradient(const Vector& theta, const Vector& draw,
                                            Index k) const {
  const double s = sigma_ * std::exp(b_.row(k).dot(theta));
  return a_.row(k).transpose() + (s * draw(k)) * b_.row(k).transpose();
}

Vector LognormalProblem::contract(const Vector& theta, const Matrix& draws, const Columns& cols,
                                  const Vector& weights) const {
  check_contract_args(*this, theta, cols, weights);
  const Vector s = sigma_ * (b_ * theta).array().exp();
  Vector out = Vector::Zero(param_dim());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const double w = weights(static_cast<Index>(i));
    if (w == 0.0) {
      continue;
    }
    const Index k = cols[i];
    // Softmax over draws of s_k * e_k; the shift by (A theta)_k cancels.
    const Eigen::ArrayXd x = s(k) * draws.row(k).transpose().array();
    const Eigen::ArrayXd e = (x - x.maxCoeff()).exp();
    const double weighted_draw = (e * draws.row(k).transpose().array()).sum() / e.sum();
    out += w * (a_.row(k).transpose() + (s(k) * weighted_draw) * b_.row(k).transpose());
  }
  return out;
}

Vector LognormalProblem::exact_log_mean(const Vector& theta) const {
  const Vector s = sigma_ * (b_ * theta).array().exp();
  return a_ * theta + 0.5 * s.cwiseAbs2();
}

std::optional<double> LognormalProblem::exact_loss(const Vector& theta) const {
  return exact_log_mean(theta).mean();
}

std::optional<Vector> LognormalProblem::exact_gradient(const Vector& theta) const {
  const Vector s2 = (sigma_ * (b_ * theta).array().exp()).square();
  const double inv_n = 1.0 / static_cast<double>(pool_size());
  return inv_n * (a_.transpose() * Vector::Ones(pool_size()) + b_.transpose() * s2);
}

FunctionProblem::FunctionProblem(Index n, Index p, Index draw_dim, ValueFn value,
                                 JacobianFn jacobian)
    : n_(n), p_(p), draw_dim_(draw_dim), value_(std::move(value)), jacobian_(std::move(jacobian)) {
  if (n < 1 || p < 0 || draw_dim < 0) {
    throw ConfigError("FunctionProblem: invalid dimensions");
  }
}

Matrix FunctionProblem::sample_draws(Index count, std::mt19937_64& rng) const {
  std::normal_distribution<double> nd;
  Matrix d(draw_dim_, count);
  for (Index j = 0; j < count; ++j) {
    for (Index i = 0; i < draw_dim_; ++i) {
      d(i, j) = nd(rng);
    }
  }
  return d;
}

Matrix FunctionProblem::log_values(const Vector& theta, const Matrix& draws,
                                   const Columns& cols) const {
  Matrix out(static_cast<Index>(cols.size()), draws.cols());
  for (Index j = 0; j < draws.cols(); ++j) {
    const Vector g = value_(theta, draws.col(j));
    if (g.size() != n_) {
      throw DimensionError("FunctionProblem: value callback returned length " +
                           std::to_string(g.size()));
    }
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const double gk = g(cols[i]);
      if (!(gk > 0.0)) {
        throw NumericError("FunctionProblem: g must be strictly positive (column " +
                           std::to_string(cols[i]) + ", draw " + std::to_string(j) + ")");
      }
      out(static_cast<Index>(i), j) = std::log(gk);
    }
  }
  return out;
}

Vector FunctionProblem::log_value_gradient(const Vector& theta, const Vector& draw,
                                           Index k) const {
  const Matrix jac = jacobian_(theta, draw);
  if (jac.rows() != n_ || jac.cols() != p_) {
    throw DimensionError("FunctionProblem: Jacobian callback has the wrong shape");
  }
  return jac.row(k).transpose() / value_(theta, draw)(k);
}

}  // namespace civi::composition
