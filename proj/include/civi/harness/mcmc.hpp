#pragma once

#include <cstdint>
#include <functional>

#include "civi/types.hpp"

namespace civi::harness {

struct McmcOptions {
  Index steps = 1000000;
  /// Fraction of steps discarded, during which the proposal scale adapts.
  double burn_in = 0.2;
  /// Samples kept after thinning the post-burn-in chain.
  Index keep = 10000;
  double target_acceptance = 0.234;
};

struct McmcResult {
  Matrix samples;  // d x keep
  /// Acceptance rate after burn-in.
  double acceptance = 0.0;
  /// Final isotropic proposal scale.
  double scale = 0.0;
  /// Set when the acceptance rate falls outside [0.05, 0.7].
  bool warning = false;
};

/// Random-walk Metropolis with an isotropic Gaussian proposal whose scale
/// adapts during burn-in (Robbins-Monro on the log scale) and is then fixed.
McmcResult random_walk_metropolis(const std::function<double(const Vector&)>& log_density,
                                  const Vector& start, const McmcOptions& options, std::uint64_t seed);

}  // namespace civi::harness
