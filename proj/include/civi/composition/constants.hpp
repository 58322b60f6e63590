#pragma once

#include <random>
#include <vector>

#include "civi/composition/problem.hpp"

namespace civi::composition {

/// Smoothness and variance constants of a compositional problem. Values
/// produced by estimate_constants are sup-estimates over finitely many
/// probes, hence lower bounds of the true suprema.
struct AssumptionConstants {
  double b_f = 0.0;  // bound on |f|
  double m_f = 0.0;  // Lipschitz constant of f
  double l_f = 0.0;  // Lipschitz constant of grad f
  double m_g = 0.0;  // Lipschitz constant of g
  double l_g = 0.0;  // Lipschitz constant of grad g
  double sigma1 = 0.0;  // outer gradient noise
  double sigma2 = 0.0;  // inner Jacobian noise
  double sigma3 = 0.0;  // inner value noise

  void validate() const;
  /// Smoothness constant of the composite objective: M_g^2 L_f + L_g M_f.
  [[nodiscard]] double lipschitz_constant() const;
};

/// Analytic constants of f = log on the interval [lo, hi], lo > 0.
AssumptionConstants log_outer_constants(double lo, double hi);

/// Empirical constants from at least two probe points. One set of
/// `k_draws` inner draws is shared by all probes.
AssumptionConstants estimate_constants(const CompositionalProblem& problem,
                                       const std::vector<Vector>& probes, Index k_draws,
                                       std::mt19937_64& rng);

}  // namespace civi::composition
