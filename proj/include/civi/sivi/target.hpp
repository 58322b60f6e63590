#pragma once

#include <string>

#include "civi/diffcore/ops.hpp"

namespace civi::sivi {

enum class TargetKind { kTwoModal, kStar, kBanana, kBlr, kCustom };

TargetKind parse_target_kind(const std::string& name);
std::string to_string(TargetKind kind);

/// Log-density (possibly unnormalized) with its gradient.
struct TargetDensity {
  TargetKind kind = TargetKind::kCustom;
  Index dim = 0;
  diffcore::ColumnFn log_density;

  [[nodiscard]] double operator()(const Vector& z) const { return log_density(z).value; }
};

/// Normalized two-dimensional toy densities:
///   two-modal  0.5 N((-2,0), I) + 0.5 N((2,0), I)
///   star       0.5 N(0, [[2,1.8],[1.8,2]]) + 0.5 N(0, [[2,-1.8],[-1.8,2]])
///   banana     (z1, z2 + z1^2 + 1) ~ N(0, [[1,0.9],[0.9,1]]), unit Jacobian
diffcore::ValueGrad toy_log_density(TargetKind kind, const Vector& z);
TargetDensity make_toy_target(TargetKind kind);

/// Gaussian target N(mean, cov).
TargetDensity make_gaussian_target(const Vector& mean, const Matrix& cov);

/// Log-density and gradient of an equal-weight Gaussian mixture.
diffcore::ValueGrad gaussian_mixture_log_density(const std::vector<Vector>& means,
                                                 const std::vector<Matrix>& covs, const Vector& z);

}  // namespace civi::sivi
