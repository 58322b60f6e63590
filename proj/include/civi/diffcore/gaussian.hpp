#pragma once

#include "civi/diffcore/ops.hpp"

namespace civi::diffcore {

/// Gaussian N(mean, L L^T) with L stored in unconstrained form: diagonal
/// entries as logs, strictly-lower entries (Cholesky kind only) as-is.
struct GaussianParams {
  Vector mean;
  FactorKind kind = FactorKind::kDiagonal;
  /// Diagonal: d log-std values. Cholesky: packed lower triangle, column
  /// by column, log-diagonal.
  Vector factor;

  [[nodiscard]] Index dim() const { return mean.size(); }
  void validate() const;

  /// Materialized lower-triangular factor L.
  [[nodiscard]] Matrix lower() const;
  [[nodiscard]] Matrix covariance() const;

  /// Flat layout [mean, factor] used by the recorded variants below.
  [[nodiscard]] Vector flatten() const;
  static GaussianParams unflatten(const Vector& flat, Index d, FactorKind kind);

  static GaussianParams isotropic(const Vector& mean, double std);
  /// From an SPD covariance via its Cholesky factor.
  static GaussianParams from_covariance(const Vector& mean, const Matrix& cov);
};

/// Exact log-density at x.
double gaussian_logpdf(const Vector& x, const GaussianParams& params);

/// mean + L * noise.
Vector reparam_sample(const GaussianParams& params, const Vector& noise);

/// Recorded log-density; `flat` holds [mean, factor] as in flatten().
Var gaussian_logpdf(Var x, Var flat, Index d, FactorKind kind);

/// Recorded reparameterized draw; `flat` as above, `noise` is d x 1.
Var reparam_sample(Var flat, Var noise, Index d, FactorKind kind);

}  // namespace civi::diffcore
