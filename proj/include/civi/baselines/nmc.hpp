#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "civi/composition/problem.hpp"

namespace civi::baselines {

enum class NmcOptimizer { kAdam, kRmsprop, kSgd };

NmcOptimizer parse_nmc_optimizer(const std::string& name);
std::string to_string(NmcOptimizer opt);

/// eta / t^decay; decay = 0 is a constant rate.
struct LearningRate {
  double eta = 1e-3;
  double decay = 0.0;
  [[nodiscard]] double at(Index t) const;
};

struct NmcConfig {
  Index outer = 1;  // N
  Index inner = 1;  // M
  NmcOptimizer optimizer = NmcOptimizer::kAdam;
  LearningRate lr;
  Index iterations = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double rmsprop_rho = 0.9;
  double eps = 1e-8;

  void validate() const;
};

struct NmcEstimate {
  double loss = 0.0;
  Vector grad;
  long long g_evals = 0;
};

/// Plug-in estimate at fixed outer columns and inner draws:
/// loss = mean_i log((1/M) sum_j g_j)_{cols_i}, gradient through the inner mean.
NmcEstimate nmc_loss_grad(const composition::CompositionalProblem& problem, const Vector& theta,
                          const composition::Columns& cols, const Matrix& draws);
/// N outer indices uniform with replacement and M fresh draws shared by all of them.
NmcEstimate nmc_loss_grad(const composition::CompositionalProblem& problem, const Vector& theta,
                          Index outer, Index inner, std::mt19937_64& rng);

/// (1/N) sum_i 1 / ((1/M) sum_j g_j)_{cols_i}.
double nmc_reciprocal_estimate(const composition::CompositionalProblem& problem, const Vector& theta,
                               const composition::Columns& cols, const Matrix& draws);

struct StepperState {
  Vector m;
  Vector v;
  Index t = 0;
  explicit StepperState(Index p = 0) : m(Vector::Zero(p)), v(Vector::Zero(p)) {}
};

/// Bias-corrected ADAM.
void step_adam(Vector& theta, StepperState& state, const Vector& grad, double lr, double beta1,
               double beta2, double eps);
/// v = rho v + (1 - rho) g^2; theta -= lr g / (sqrt(v) + eps). No momentum.
void step_rmsprop(Vector& theta, StepperState& state, const Vector& grad, double lr, double rho,
                  double eps);
void step_sgd(Vector& theta, StepperState& state, const Vector& grad, double lr);

struct NmcRecord {
  Index t = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  long long g_evals = 0;
};

struct NmcResult {
  Vector theta;
  std::vector<NmcRecord> trajectory;
};

using NmcObserver = std::function<void(const NmcRecord&, const Vector& theta)>;

/// Optimizes the plug-in objective with the chosen stepper. Step t uses
/// the stream keyed by (seed, t), so runs are reproducible.
NmcResult run_nmc(const composition::CompositionalProblem& problem, const Vector& theta0,
                  const NmcConfig& config, std::uint64_t seed, const NmcObserver& observer = {});

}  // namespace civi::baselines
