#include "civi/sivi/problem.hpp"

#include <string>

#include "civi/diffcore/tape.hpp"

namespace civi::sivi {

using diffcore::Tape;
using diffcore::Var;

namespace {

Matrix gather(const Matrix& m, const composition::Columns& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.col(static_cast<Index>(i)) = m.col(cols[i]);
  }
  return out;
}

/// |cols| x K matrix of log q(h_j | eps_hat_k) - log p(h_j) on `tape`.
Var ratio_graph(Tape& tape, Var theta, const SemiImplicitModel& model, const SamplePool& pool,
                const TargetDensity& target, const Matrix& draws,
                const composition::Columns& cols, Var* target_out) {
  const Var l = model.lower(theta);
  const Var eps = tape.constant(gather(pool.eps, cols));
  const Var u = tape.constant(gather(pool.u, cols));
  const Var h = diffcore::add(model.conditional_mean(theta, eps), diffcore::matmul(l, u));
  const Var centres = model.conditional_mean(theta, tape.constant(draws));
  const Var log_q = diffcore::pairwise_gauss_logpdf(h, centres, l);
  *target_out = diffcore::columnwise(h, target.log_density, [&cols](Index i) {
    return "pool entry " + std::to_string(cols[static_cast<std::size_t>(i)]);
  });
  return log_q;
}

void check_cols(const SamplePool& pool, const composition::Columns& cols) {
  for (Index k : cols) {
    if (k < 0 || k >= pool.size()) {
      throw DimensionError("SiviProblem: pool entry " + std::to_string(k) + " outside pool of size " +
                           std::to_string(pool.size()));
    }
  }
}

}  // namespace

SiviProblem::SiviProblem(SemiImplicitModel model, SamplePool pool, TargetDensity target)
    : model_(std::move(model)), pool_(std::move(pool)), target_(std::move(target)) {
  model_.validate();
  if (pool_.size() < 1) {
    throw DimensionError("SiviProblem: empty pool");
  }
  if (pool_.u.rows() != model_.z_dim || pool_.eps.rows() != model_.eps_dim ||
      pool_.eps.cols() != pool_.u.cols()) {
    throw DimensionError("SiviProblem: pool shapes do not match the model");
  }
  if (target_.dim != model_.z_dim) {
    throw DimensionError("SiviProblem: target has dimension " + std::to_string(target_.dim) +
                         ", model latent dimension is " + std::to_string(model_.z_dim));
  }
  if (!target_.log_density) {
    throw ConfigError("SiviProblem: target has no log-density");
  }
}

Matrix SiviProblem::sample_draws(Index count, std::mt19937_64& rng) const {
  return model_.sample_eps(count, rng);
}

Matrix SiviProblem::log_values(const Vector& theta, const Matrix& draws,
                               const composition::Columns& cols) const {
  if (theta.size() != param_dim()) {
    throw DimensionError("SiviProblem: theta has length " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(param_dim()));
  }
  if (draws.rows() != draw_dim()) {
    throw DimensionError("SiviProblem: draws must have " + std::to_string(draw_dim()) + " rows");
  }
  check_cols(pool_, cols);
  if (cols.empty()) return Matrix(0, draws.cols());
  Tape tape;
  Var log_p;
  const Var log_q = ratio_graph(tape, tape.constant(theta), model_, pool_, target_, draws, cols, &log_p);
  return log_q.value().colwise() - log_p.value().col(0);
}

Vector SiviProblem::log_value_gradient(const Vector& theta, const Vector& draw, Index k) const {
  return log_ratio_J(model_, pool_, k, draw, target_, theta).grad;
}

Vector SiviProblem::contract(const Vector& theta, const Matrix& draws,
                             const composition::Columns& cols, const Vector& weights) const {
  composition::check_contract_args(*this, theta, cols, weights);
  if (draws.rows() != draw_dim() || draws.cols() < 1) {
    throw DimensionError("SiviProblem::contract: draws must be " + std::to_string(draw_dim()) +
                         " x K with K >= 1");
  }
  if (cols.empty()) return Vector::Zero(param_dim());
  Tape tape;
  const Var th = tape.variable(theta);
  Var log_p;
  const Var log_q = ratio_graph(tape, th, model_, pool_, target_, draws, cols, &log_p);
  // The -log K of the draw mean is constant in theta and dropped.
  const Var log_gbar = diffcore::sub(diffcore::rowwise_logsumexp(log_q), log_p);
  tape.backward(diffcore::weighted_sum(log_gbar, weights));
  return tape.gradient(th).col(0);
}

diffcore::ValueGrad log_ratio_J(const SemiImplicitModel& model, const SamplePool& pool, Index j,
                                const Vector& eps_hat, const TargetDensity& target,
                                const ParamVector& theta) {
  if (theta.size() != model.param_count()) {
    throw DimensionError("log_ratio_J: theta has length " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(model.param_count()));
  }
  if (eps_hat.size() != model.eps_dim) {
    throw DimensionError("log_ratio_J: eps_hat has length " + std::to_string(eps_hat.size()) +
                         ", expected " + std::to_string(model.eps_dim));
  }
  if (target.dim != model.z_dim) {
    throw DimensionError("log_ratio_J: target and model latent dimensions differ");
  }
  const composition::Columns cols{j};
  check_cols(pool, cols);
  Tape tape;
  const Var th = tape.variable(theta);
  Var log_p;
  const Var log_q = ratio_graph(tape, th, model, pool, target, Matrix(eps_hat), cols, &log_p);
  const Var out = diffcore::sub(log_q, log_p);
  tape.backward(out);
  return {out.scalar(), tape.gradient(th).col(0)};
}

std::unique_ptr<SiviProblem> make_compositional(const SemiImplicitModel& model,
                                                const SamplePool& pool,
                                                const TargetDensity& target) {
  return std::make_unique<SiviProblem>(model, pool, target);
}

}  // namespace civi::sivi
