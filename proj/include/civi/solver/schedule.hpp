#pragma once

#include <optional>
#include <vector>

#include "civi/sketch/sketch.hpp"

namespace civi::solver {

/// How batch sizes grow with t.
enum class BatchGrowth {
  kTheorem,   // K_i = ceil(C_i t^{4/5})
  kConstant,  // K_i = ceil(C_i)
};

BatchGrowth parse_batch_growth(const std::string& name);
std::string to_string(BatchGrowth growth);

/// Override of the step-size and momentum constants on a parameter range.
struct GroupOverride {
  Index begin = 0;
  Index end = 0;
  std::optional<double> c_alpha;
  std::optional<double> c_gamma;
};

struct ScheduleConfig {
  double c_alpha = 1e-3;
  double c_beta = 0.9;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double c_gamma = 0.9;
  double mu = 0.999;
  double xi = 1e-8;
  /// Sketch size; 0 means n.
  Index d_t = 0;
  sketch::SketchMode sketch_mode = sketch::SketchMode::kUniform;
  Index iterations = 100;
  BatchGrowth batch_growth = BatchGrowth::kTheorem;
  std::vector<GroupOverride> groups;
  /// Number of contiguous chunks of the pool smoothed in turn.
  Index chunks = 1;
  /// Iterations between chunk rotations; 0 picks ceil(T / (4 chunks))
  /// when chunks > 1 and never rotates a single chunk.
  Index rotation_period = 0;
  /// Zero step size everywhere; theta stays at its start. gamma2 keeps
  /// using c_alpha.
  bool frozen = false;

  /// Throws ConfigError on any out-of-range value, including a gamma2
  /// outside (0, 1) at some t <= iterations for any group.
  void validate(Index n, Index p) const;
  [[nodiscard]] Index sketch_size(Index n) const { return d_t == 0 ? n : d_t; }
  /// Resolved rotation period, or 0 when rotation is off.
  [[nodiscard]] Index effective_rotation_period() const;
};

struct ScheduleValues {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  Index k1 = 1;
  Index k2 = 1;
  Index k3 = 1;
};

/// Step t >= 1 with the given step-size and momentum constants.
ScheduleValues schedule(Index t, const ScheduleConfig& config, double c_alpha, double c_gamma);
/// Step t >= 1 with the default constants.
ScheduleValues schedule(Index t, const ScheduleConfig& config);

/// Per-coordinate alpha, gamma1 and gamma2 at step t.
struct CoordinateSchedule {
  Vector alpha;
  Vector gamma1;
  Vector gamma2;
};
CoordinateSchedule coordinate_schedule(Index t, const ScheduleConfig& config, Index p);

}  // namespace civi::solver
