#include "civi/baselines/nmc.hpp"

#include <cmath>

#include "civi/composition/rng.hpp"

namespace civi::baselines {

namespace {

void check_grad(const Vector& theta, const StepperState& state, const Vector& grad) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw DimensionError("stepper: length mismatch");
  }
  if (!grad.allFinite()) {
    throw NumericError("stepper: non-finite gradient at step " + std::to_string(state.t + 1));
  }
}

}  // namespace

NmcOptimizer parse_nmc_optimizer(const std::string& name) {
  if (name == "adam") return NmcOptimizer::kAdam;
  if (name == "rmsprop") return NmcOptimizer::kRmsprop;
  if (name == "sgd") return NmcOptimizer::kSgd;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam, rmsprop, sgd)");
}

std::string to_string(NmcOptimizer opt) {
  switch (opt) {
    case NmcOptimizer::kAdam: return "adam";
    case NmcOptimizer::kRmsprop: return "rmsprop";
    case NmcOptimizer::kSgd: return "sgd";
  }
  return "adam";
}

double LearningRate::at(Index t) const {
  return decay == 0.0 ? eta : eta / std::pow(static_cast<double>(t), decay);
}

void NmcConfig::validate() const {
  if (outer < 1 || inner < 1) {
    throw ConfigError("NMC: outer and inner sample counts must be at least 1");
  }
  if (!(lr.eta > 0.0) || !(lr.decay >= 0.0)) {
    throw ConfigError("NMC: learning rate must be positive with a nonnegative decay exponent");
  }
  if (iterations < 1) {
    throw ConfigError("NMC: iteration budget must be at least 1");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0)) {
    throw ConfigError("NMC: moment decay rates must lie in [0, 1)");
  }
  if (!(eps > 0.0)) {
    throw ConfigError("NMC: eps must be positive");
  }
}

NmcEstimate nmc_loss_grad(const composition::CompositionalProblem& problem, const Vector& theta,
                          const composition::Columns& cols, const Matrix& draws) {
  if (cols.empty() || draws.cols() < 1) {
    throw ConfigError("nmc_loss_grad: need at least one outer index and one draw");
  }
  const auto n_out = static_cast<double>(cols.size());
  NmcEstimate out;
  out.loss = composition::log_mean_rows(problem.log_values(theta, draws, cols)).mean();
  out.grad = problem.contract(theta, draws, cols,
                              Vector::Constant(static_cast<Index>(cols.size()), 1.0 / n_out));
  out.g_evals = 2LL * static_cast<long long>(cols.size()) * draws.cols();
  return out;
}

NmcEstimate nmc_loss_grad(const composition::CompositionalProblem& problem, const Vector& theta,
                          Index outer, Index inner, std::mt19937_64& rng) {
  if (outer < 1 || inner < 1) {
    throw ConfigError("nmc_loss_grad: N and M must be at least 1");
  }
  std::uniform_int_distribution<Index> pick(0, problem.pool_size() - 1);
  composition::Columns cols(static_cast<std::size_t>(outer));
  for (auto& c : cols) c = pick(rng);
  const Matrix draws = problem.sample_draws(inner, rng);
  return nmc_loss_grad(problem, theta, cols, draws);
}

double nmc_reciprocal_estimate(const composition::CompositionalProblem& problem, const Vector& theta,
                               const composition::Columns& cols, const Matrix& draws) {
  if (cols.empty()) {
    throw ConfigError("nmc_reciprocal_estimate: no outer indices");
  }
  const Vector lm = composition::log_mean_rows(problem.log_values(theta, draws, cols));
  return (-lm.array()).exp().mean();
}

void step_adam(Vector& theta, StepperState& state, const Vector& grad, double lr, double beta1,
               double beta2, double eps) {
  check_grad(theta, state, grad);
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseAbs2();
  const auto t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  theta.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

void step_rmsprop(Vector& theta, StepperState& state, const Vector& grad, double lr, double rho,
                  double eps) {
  check_grad(theta, state, grad);
  ++state.t;
  state.v = rho * state.v + (1.0 - rho) * grad.cwiseAbs2();
  theta.array() -= lr * grad.array() / (state.v.array().sqrt() + eps);
}

void step_sgd(Vector& theta, StepperState& state, const Vector& grad, double lr) {
  check_grad(theta, state, grad);
  ++state.t;
  theta -= lr * grad;
}

NmcResult run_nmc(const composition::CompositionalProblem& problem, const Vector& theta0,
                  const NmcConfig& config, std::uint64_t seed, const NmcObserver& observer) {
  config.validate();
  if (theta0.size() != problem.param_dim()) {
    throw DimensionError("run_nmc: theta has length " + std::to_string(theta0.size()) +
                         ", problem expects " + std::to_string(problem.param_dim()));
  }
  NmcResult out;
  out.theta = theta0;
  StepperState state(theta0.size());
  long long evals = 0;
  for (Index t = 1; t <= config.iterations; ++t) {
    auto rng = composition::make_stream(seed, static_cast<std::uint64_t>(t),
                                        composition::Stream::kBaseline);
    const NmcEstimate est = nmc_loss_grad(problem, out.theta, config.outer, config.inner, rng);
    const double lr = config.lr.at(t);
    switch (config.optimizer) {
      case NmcOptimizer::kAdam:
        step_adam(out.theta, state, est.grad, lr, config.adam_beta1, config.adam_beta2, config.eps);
        break;
      case NmcOptimizer::kRmsprop:
        step_rmsprop(out.theta, state, est.grad, lr, config.rmsprop_rho, config.eps);
        break;
      case NmcOptimizer::kSgd:
        step_sgd(out.theta, state, est.grad, lr);
        break;
    }
    evals += est.g_evals;
    const NmcRecord rec{t, est.loss, est.grad.norm(), lr, evals};
    if (observer) observer(rec, out.theta);
    out.trajectory.push_back(rec);
  }
  return out;
}

}  // namespace civi::baselines
