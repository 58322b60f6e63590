#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "civi/sivi/model.hpp"
#include "civi/solver/schedule.hpp"
#include "civi/solver/solver.hpp"
#include "json.hpp"

namespace civi::harness {

using Json = nlohmann::json;

enum class Experiment { kToy, kBlr, kBiasRate, kGradcheck, kRecurrence };

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);

/// Step-size / momentum override on a named parameter group ("mean" or
/// "cov") or an explicit [begin, end) range.
struct GroupSpec {
  std::string group;
  Index begin = 0;
  Index end = 0;
  std::optional<double> c_alpha;
  std::optional<double> c_gamma;
};

struct ToyOptions {
  std::string target = "two-modal";
  Index grid = 100;
  /// xmin, xmax, ymin, ymax of the contour grids.
  std::array<double, 4> extent{-5.0, 5.0, -5.0, 5.0};
  /// Samples used to fit the kernel estimate, and a separate set to evaluate it.
  Index kde_samples = 10000;
  Index eval_samples = 10000;
  Index dump_samples = 10000;
};

struct BlrOptions {
  /// spam, nodal, waveform or synthetic: picks schedule and model defaults.
  std::string preset = "synthetic";
  /// CSV path; empty means a synthetic dataset.
  std::string data;
  bool standardize = true;
  Index synthetic_rows = 200;
  Index synthetic_dim = 2;
  std::uint64_t synthetic_seed = 7;
  double prior_variance = 100.0;
  Index mcmc_steps = 1000000;
  Index posterior_samples = 10000;
};

struct BiasRateOptions {
  Index n = 4;
  Index repetitions = 50;
  std::vector<Index> checkpoints{10, 100, 1000, 10000};
  /// Start point; every coordinate set to this value.
  double theta0 = 0.5;
  /// Inner noise scale of the fixture; draw log-std is sigma * exp(theta).
  double sigma = 1.0;
};

/// A_{t+1} = (1 - eta_t + c1 eta_t^2) A_t + c2 zeta_t with
/// eta_t = c_eta / t^a and zeta_t = c_zeta / t^b.
struct RecurrenceCase {
  double c_eta = 2.0;
  double c_zeta = 1.0;
  double a = 0.2;
  double b = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double a1 = 1.0;
  Index horizon = 1000000;

  /// Throws ConfigError unless c_eta > 1 + b - a, c_zeta >= 0,
  /// b - a outside (-1, 0), 0 < a <= 1, c1, c2 >= 0 and horizon >= 1.
  void validate() const;
};

struct GradcheckOptions {
  Index trials = 100;
  double tolerance = 1e-4;
  /// Five-point stencil step.
  double step = 1e-4;
};

struct RunConfig {
  Experiment experiment = Experiment::kToy;
  std::uint64_t seed = 1;
  /// Zero wall-clock columns so trajectories are byte-comparable.
  bool deterministic = false;
  solver::ScheduleConfig schedule;
  solver::OutputMode output = solver::OutputMode::kUniform;
  std::vector<GroupSpec> groups;
  sivi::SemiImplicitModel model;
  Index pool_size = 1024;
  ToyOptions toy;
  BlrOptions blr;
  BiasRateOptions bias_rate;
  RecurrenceCase recurrence;
  GradcheckOptions gradcheck;

  /// Every field, including defaults, so a dump fully determines a run.
  [[nodiscard]] Json to_json() const;
  /// FNV-1a of the compact JSON dump, as 16 hex digits.
  [[nodiscard]] std::string hash() const;
};

/// Defaults for an experiment. Toys take their target's settings, BLR its
/// preset's; `selector` names the target or preset (empty keeps the default).
RunConfig default_config(Experiment experiment, const std::string& selector = "");

/// Overlays `patch` on `config`. Unknown keys and wrongly typed values
/// raise ConfigError naming the offending path.
void apply_json(RunConfig& config, const Json& patch);

/// Defaults for the experiment (and the target or preset named in the
/// document) with the document applied on top. The document's
/// "experiment", when present, must match.
RunConfig config_from_json(Experiment experiment, const Json& doc);
RunConfig load_config(Experiment experiment, const std::filesystem::path& path);

/// Schedule with group names resolved to parameter ranges of `model`.
solver::ScheduleConfig resolve_schedule(const RunConfig& config, const sivi::SemiImplicitModel& model);

}  // namespace civi::harness
