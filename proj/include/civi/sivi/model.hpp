#pragma once

#include <random>

#include "civi/diffcore/mlp.hpp"
#include "civi/diffcore/ops.hpp"

namespace civi::sivi {

/// Half-open index range [begin, end) inside the flat parameter vector.
struct ParamRange {
  Index begin = 0;
  Index end = 0;
  [[nodiscard]] Index size() const { return end - begin; }
};

/// Semi-implicit family: eps ~ N(0, eps_variance * I), and
/// z | eps ~ N(mu(eps), L L^T) with mu an MLP and L a fixed-shape factor.
/// Parameters are laid out as [MLP weights | factor storage].
struct SemiImplicitModel {
  Index eps_dim = 3;
  double eps_variance = 1.0;
  Index z_dim = 2;
  diffcore::MlpSpec mean_net{3, {50, 50}, 2, diffcore::Activation::kRelu};
  diffcore::FactorKind cov_kind = diffcore::FactorKind::kDiagonal;
  /// Initial log of the factor diagonal.
  double init_log_std = 0.0;

  void validate() const;
  [[nodiscard]] Index param_count() const;
  /// Parameters of the mean network.
  [[nodiscard]] ParamRange mean_group() const;
  /// Parameters of the covariance factor.
  [[nodiscard]] ParamRange cov_group() const;

  /// Xavier-normal network weights and a diagonal factor exp(init_log_std).
  [[nodiscard]] ParamVector init(std::mt19937_64& rng) const;

  /// Lower factor L for the given parameters.
  [[nodiscard]] Matrix lower(const ParamVector& theta) const;
  /// mu(eps) for each column of `eps`.
  [[nodiscard]] Matrix conditional_mean(const ParamVector& theta, const Matrix& eps) const;
  /// h(u; eps) = mu(eps) + L u, column by column.
  [[nodiscard]] Matrix transform(const ParamVector& theta, const Matrix& u, const Matrix& eps) const;
  /// `count` draws from the marginal q(z); one per column.
  [[nodiscard]] Matrix sample(const ParamVector& theta, Index count, std::mt19937_64& rng) const;
  /// `count` mixing draws eps, one per column.
  [[nodiscard]] Matrix sample_eps(Index count, std::mt19937_64& rng) const;

  /// Recorded variants sharing one parameter node.
  diffcore::Var lower(diffcore::Var theta) const;
  diffcore::Var conditional_mean(diffcore::Var theta, diffcore::Var eps) const;
};

/// Standard normal matrix of the given shape.
Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng);

}  // namespace civi::sivi
