#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "civi/composition/problem.hpp"
#include "civi/solver/schedule.hpp"

namespace civi::solver {

enum class OutputMode { kUniform, kFinal };

OutputMode parse_output_mode(const std::string& name);
std::string to_string(OutputMode mode);

struct OptimizerState {
  Vector theta;
  Vector m;
  Vector v;
  Vector z;
  Vector log_y;
  /// Completed iterations; the next step is t + 1.
  Index t = 0;
  /// Contiguous partition of [0, n) and the chunk being smoothed.
  std::vector<composition::Columns> chunks;
  Index active_chunk = 0;
  /// Re-initializations of each chunk caused by rotation.
  std::vector<Index> rotations;
  /// Whether each chunk's log_y has been set at least once.
  std::vector<bool> initialized;
  /// Reservoir holding one uniformly chosen iterate among theta_2 .. theta_{t+1}.
  Vector reservoir;
  /// Inner-value evaluations so far (one per column per draw).
  long long g_evals = 0;

  /// Versioned JSON with every double as a hex-float string.
  [[nodiscard]] std::string to_json() const;
  static OptimizerState from_json(const std::string& text);
};

/// Contiguous near-equal split of [0, n).
std::vector<composition::Columns> partition_chunks(Index n, Index chunks);

struct IterationRecord {
  Index t = 0;
  /// Mean of log gbar over the active chunk at the extrapolated point.
  double loss = 0.0;
  double grad_norm = 0.0;
  /// Largest absolute gradient entry.
  double grad_max_abs = 0.0;
  /// Step size of the default group.
  double alpha = 0.0;
  double wall_ms = 0.0;
  /// ||exact gradient - estimate||^2 when the problem provides one.
  std::optional<double> bias;
  long long g_evals = 0;
};

using Observer = std::function<void(const IterationRecord&, const OptimizerState&)>;

/// Aborted step: carries the failing iteration and the state before it.
class SolverError : public std::runtime_error {
 public:
  SolverError(Index t, const std::string& what, std::string checkpoint)
      : std::runtime_error("iteration " + std::to_string(t) + ": " + what),
        t_(t),
        checkpoint_(std::move(checkpoint)) {}
  [[nodiscard]] Index iteration() const { return t_; }
  [[nodiscard]] const std::string& checkpoint() const { return checkpoint_; }

 private:
  Index t_;
  std::string checkpoint_;
};

struct RunResult {
  Vector theta_out;
  OptimizerState state;
  std::vector<IterationRecord> trajectory;
};

/// Serial CI-VI loop. Random streams are keyed by (seed, t, role), so a
/// run resumed from a checkpoint continues bit-exactly.
class CiviSolver {
 public:
  CiviSolver(const composition::CompositionalProblem& problem, ScheduleConfig config,
             std::uint64_t seed, OutputMode output = OutputMode::kUniform);

  /// Fresh state at theta1: z = theta, m = v = 0, first chunk initialized
  /// from log gbar(theta1) over a K3 batch.
  [[nodiscard]] OptimizerState init(const Vector& theta1) const;

  /// One iteration: sketched gradient, primary update, extrapolation,
  /// smoothing on the active chunk, then rotation when due.
  IterationRecord step(OptimizerState& state) const;

  /// Steps until state.t reaches the iteration budget.
  RunResult run(OptimizerState state, const Observer& observer = {}) const;
  RunResult run(const Vector& theta1, const Observer& observer = {}) const;

  [[nodiscard]] const ScheduleConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  void reinit_chunk(OptimizerState& state, const Vector& point, Index chunk, Index k3,
                    std::mt19937_64& rng) const;

  const composition::CompositionalProblem* problem_;
  ScheduleConfig config_;
  std::uint64_t seed_;
  OutputMode output_;
};

}  // namespace civi::solver
