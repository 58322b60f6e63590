#include "civi/diffcore/gaussian.hpp"

#include <cmath>
#include <string>

namespace civi::diffcore {

void GaussianParams::validate() const {
  const Index d = dim();
  if (d < 1) {
    throw DimensionError("GaussianParams: empty mean");
  }
  if (factor.size() != factor_size(kind, d)) {
    throw DimensionError("GaussianParams: factor storage has " + std::to_string(factor.size()) +
                         " entries, expected " + std::to_string(factor_size(kind, d)));
  }
  if (!mean.allFinite() || !factor.allFinite()) {
    throw NumericError("GaussianParams: non-finite parameters");
  }
}

Matrix GaussianParams::lower() const {
  validate();
  Tape tape;
  Var flat = tape.constant(factor);
  return lower_factor(flat, 0, dim(), kind).value();
}

Matrix GaussianParams::covariance() const {
  const Matrix l = lower();
  return l * l.transpose();
}

Vector GaussianParams::flatten() const {
  Vector out(mean.size() + factor.size());
  out << mean, factor;
  return out;
}

GaussianParams GaussianParams::unflatten(const Vector& flat, Index d, FactorKind kind) {
  const Index nf = factor_size(kind, d);
  if (flat.size() != d + nf) {
    throw DimensionError("GaussianParams::unflatten: length mismatch");
  }
  return GaussianParams{flat.head(d), kind, flat.tail(nf)};
}

GaussianParams GaussianParams::isotropic(const Vector& mean, double std) {
  if (!(std > 0.0)) {
    throw ConfigError("GaussianParams::isotropic: std must be positive");
  }
  return GaussianParams{mean, FactorKind::kDiagonal, Vector::Constant(mean.size(), std::log(std))};
}

GaussianParams GaussianParams::from_covariance(const Vector& mean, const Matrix& cov) {
  const Index d = mean.size();
  if (cov.rows() != d || cov.cols() != d) {
    throw DimensionError("GaussianParams::from_covariance: covariance shape mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("GaussianParams::from_covariance: covariance is not positive definite");
  }
  const Matrix l = llt.matrixL();
  Vector packed(factor_size(FactorKind::kCholesky, d));
  Index pos = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i, ++pos) {
      packed(pos) = (i == j) ? std::log(l(i, i)) : l(i, j);
    }
  }
  return GaussianParams{mean, FactorKind::kCholesky, packed};
}

double gaussian_logpdf(const Vector& x, const GaussianParams& params) {
  params.validate();
  if (x.size() != params.dim()) {
    throw DimensionError("gaussian_logpdf: point has dimension " + std::to_string(x.size()) +
                         ", distribution has " + std::to_string(params.dim()));
  }
  if (!x.allFinite()) {
    throw NumericError("gaussian_logpdf: non-finite point");
  }
  Tape tape;
  Var flat = tape.constant(params.flatten());
  return gaussian_logpdf(tape.constant(x), flat, params.dim(), params.kind).scalar();
}

Vector reparam_sample(const GaussianParams& params, const Vector& noise) {
  params.validate();
  if (noise.size() != params.dim()) {
    throw DimensionError("reparam_sample: noise has dimension " + std::to_string(noise.size()) +
                         ", distribution has " + std::to_string(params.dim()));
  }
  return params.mean + params.lower().triangularView<Eigen::Lower>() * noise;
}

Var gaussian_logpdf(Var x, Var flat, Index d, FactorKind kind) {
  if (x.rows() != d || x.cols() != 1) {
    throw DimensionError("gaussian_logpdf: point must be " + std::to_string(d) + "x1");
  }
  Var mean = slice(flat, 0, d, 1);
  Var l = lower_factor(flat, d, d, kind);
  return paired_gauss_logpdf(x, mean, l);
}

Var reparam_sample(Var flat, Var noise, Index d, FactorKind kind) {
  if (noise.rows() != d || noise.cols() != 1) {
    throw DimensionError("reparam_sample: noise must be " + std::to_string(d) + "x1");
  }
  Var mean = slice(flat, 0, d, 1);
  Var l = lower_factor(flat, d, d, kind);
  return add(mean, matmul(l, noise));
}

}  // namespace civi::diffcore
