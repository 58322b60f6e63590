#pragma once

#include <memory>

#include "civi/composition/problem.hpp"
#include "civi/sivi/model.hpp"
#include "civi/sivi/pool.hpp"
#include "civi/sivi/target.hpp"

namespace civi::sivi {

/// Compositional form of the negative ELBO. Outer index j runs over the
/// pool, inner draws are mixing samples eps_hat, and
///   log g_{eps_hat, j}(theta) = log q(h_j | eps_hat) - log p(h_j),
/// with h_j = mu(eps_j) + L u_j. theta enters through h_j and through the
/// conditional density, and both paths are differentiated.
class SiviProblem final : public composition::CompositionalProblem {
 public:
  SiviProblem(SemiImplicitModel model, SamplePool pool, TargetDensity target);

  [[nodiscard]] Index pool_size() const override { return pool_.size(); }
  [[nodiscard]] Index param_dim() const override { return model_.param_count(); }
  [[nodiscard]] Index draw_dim() const override { return model_.eps_dim; }

  [[nodiscard]] Matrix sample_draws(Index count, std::mt19937_64& rng) const override;
  [[nodiscard]] Matrix log_values(const Vector& theta, const Matrix& draws,
                                  const composition::Columns& cols) const override;
  [[nodiscard]] Vector log_value_gradient(const Vector& theta, const Vector& draw,
                                          Index k) const override;
  /// One tape for the whole batch: rowwise log-sum-exp over draws, minus the
  /// target term, weighted and reduced before a single backward pass.
  [[nodiscard]] Vector contract(const Vector& theta, const Matrix& draws,
                                const composition::Columns& cols,
                                const Vector& weights) const override;

  [[nodiscard]] const SemiImplicitModel& model() const { return model_; }
  [[nodiscard]] const SamplePool& pool() const { return pool_; }
  [[nodiscard]] const TargetDensity& target() const { return target_; }

 private:
  SemiImplicitModel model_;
  SamplePool pool_;
  TargetDensity target_;
};

/// log q(h_j | eps_hat) - log p(h_j) for pool entry j, with its gradient in theta.
diffcore::ValueGrad log_ratio_J(const SemiImplicitModel& model, const SamplePool& pool, Index j,
                                const Vector& eps_hat, const TargetDensity& target,
                                const ParamVector& theta);

/// Throws DimensionError when the model, pool and target disagree.
std::unique_ptr<SiviProblem> make_compositional(const SemiImplicitModel& model,
                                                const SamplePool& pool,
                                                const TargetDensity& target);

}  // namespace civi::sivi
