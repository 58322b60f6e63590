#include "civi/sivi/model.hpp"

#include <cmath>
#include <string>

namespace civi::sivi {

using diffcore::Tape;
using diffcore::Var;

void SemiImplicitModel::validate() const {
  if (eps_dim < 1 || z_dim < 1) {
    throw ConfigError("SemiImplicitModel: eps_dim and z_dim must be positive");
  }
  if (!(eps_variance > 0.0)) {
    throw ConfigError("SemiImplicitModel: eps_variance must be positive");
  }
  mean_net.validate();
  if (mean_net.input_dim != eps_dim || mean_net.output_dim != z_dim) {
    throw ConfigError("SemiImplicitModel: mean network maps " +
                      std::to_string(mean_net.input_dim) + " -> " +
                      std::to_string(mean_net.output_dim) + " but the model needs " +
                      std::to_string(eps_dim) + " -> " + std::to_string(z_dim));
  }
}

Index SemiImplicitModel::param_count() const {
  return mean_net.param_count() + diffcore::factor_size(cov_kind, z_dim);
}

ParamRange SemiImplicitModel::mean_group() const { return {0, mean_net.param_count()}; }

ParamRange SemiImplicitModel::cov_group() const { return {mean_net.param_count(), param_count()}; }

ParamVector SemiImplicitModel::init(std::mt19937_64& rng) const {
  validate();
  ParamVector theta = ParamVector::Zero(param_count());
  theta.head(mean_net.param_count()) = diffcore::xavier_normal_init(mean_net, rng);
  Index pos = mean_net.param_count();
  if (cov_kind == diffcore::FactorKind::kDiagonal) {
    theta.segment(pos, z_dim).setConstant(init_log_std);
  } else {
    for (Index j = 0; j < z_dim; ++j) {
      theta(pos) = init_log_std;
      pos += z_dim - j;
    }
  }
  return theta;
}

Var SemiImplicitModel::lower(Var theta) const {
  return diffcore::lower_factor(theta, mean_net.param_count(), z_dim, cov_kind);
}

Var SemiImplicitModel::conditional_mean(Var theta, Var eps) const {
  return diffcore::mlp_forward(mean_net, theta, 0, eps);
}

Matrix SemiImplicitModel::lower(const ParamVector& theta) const {
  if (theta.size() != param_count()) {
    throw DimensionError("SemiImplicitModel: parameter vector has length " +
                         std::to_string(theta.size()) + ", expected " +
                         std::to_string(param_count()));
  }
  Tape tape;
  return lower(tape.constant(theta)).value();
}

Matrix SemiImplicitModel::conditional_mean(const ParamVector& theta, const Matrix& eps) const {
  return diffcore::mlp_forward(mean_net, theta.head(mean_net.param_count()), eps);
}

Matrix SemiImplicitModel::transform(const ParamVector& theta, const Matrix& u,
                                    const Matrix& eps) const {
  if (u.rows() != z_dim || u.cols() != eps.cols()) {
    throw DimensionError("SemiImplicitModel::transform: u must be z_dim x count");
  }
  const Matrix l = lower(theta);
  return conditional_mean(theta, eps) + l.triangularView<Eigen::Lower>() * u;
}

Matrix SemiImplicitModel::sample_eps(Index count, std::mt19937_64& rng) const {
  return std::sqrt(eps_variance) * standard_normal(eps_dim, count, rng);
}

Matrix SemiImplicitModel::sample(const ParamVector& theta, Index count,
                                 std::mt19937_64& rng) const {
  const Matrix eps = sample_eps(count, rng);
  const Matrix u = standard_normal(z_dim, count, rng);
  return transform(theta, u, eps);
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = nd(rng);
    }
  }
  return m;
}

}  // namespace civi::sivi
