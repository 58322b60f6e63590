#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "civi/composition/problem.hpp"
#include "civi/harness/config.hpp"

namespace civi::harness {

struct GradcheckEntry {
  std::string name;
  Index trials = 0;
  /// Worst componentwise relative error against five-point differences.
  double max_error = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 1e-4;
  [[nodiscard]] bool pass() const;
  [[nodiscard]] Json to_json() const;
};

/// Relative-error denominators never drop below this times max(1, |f|), so
/// entries whose true derivative is near zero are judged on absolute error
/// at the precision a difference quotient of f can reach.
inline constexpr double kGradcheckFloor = 1e-6;

/// Every recorded op, the Gaussian and network helpers, the toy and BLR
/// target gradients, the two-path log-ratio gradient, the SIVI batch
/// contraction and the end-to-end CI-VI estimate at d_t = n.
GradcheckReport run_gradcheck(const GradcheckOptions& options, std::uint64_t seed);

/// End-to-end estimate on one problem: f-batch hitting every index once,
/// y equal to the draw mean and a full sketch, against five-point
/// differences of the plug-in loss over the same draws. Parameter-free
/// problems give an empty report.
GradcheckReport gradcheck_problem(const composition::CompositionalProblem& problem, const Vector& theta,
                                  Index draws, const GradcheckOptions& options, std::uint64_t seed);

}  // namespace civi::harness
