#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "civi/harness/config.hpp"
#include "civi/solver/solver.hpp"

namespace civi::harness {

/// Called after every solver iteration (progress display).
using IterationHook = std::function<void(const solver::IterationRecord&)>;

/// Each driver creates `out` if needed, writes its artifacts and
/// report.json there, and returns the report.

/// trajectory.csv, samples.csv, learned_grid.csv, target_grid.csv. On a
/// failed step, trajectory.csv and checkpoint.json are written before the
/// SolverError propagates.
Json run_toy(const RunConfig& config, const std::filesystem::path& out, const IterationHook& hook = {});

/// trajectory.csv, posterior_samples.csv, mcmc_samples.csv (unless
/// mcmc_steps is 0) and data.csv for synthetic datasets.
Json run_blr(const RunConfig& config, const std::filesystem::path& out, const IterationHook& hook = {});

/// bias_rate.csv with the mean squared gradient error per checkpoint, and
/// trajectory.csv of the first repetition.
Json run_bias_rate(const RunConfig& config, const std::filesystem::path& out, const IterationHook& hook = {});

Json run_gradcheck_experiment(const RunConfig& config, const std::filesystem::path& out);
Json run_recurrence_experiment(const RunConfig& config, const std::filesystem::path& out);

/// Dispatches on config.experiment and writes manifest.json.
Json run_experiment(const RunConfig& config, const std::filesystem::path& out, const IterationHook& hook = {});

/// manifest.json content: format, tool version, experiment, seed, config
/// hash, full config and build information.
Json make_manifest(const RunConfig& config);

struct RerunResult {
  Json report;
  /// Whether the compared artifact matched the original.
  bool identical = false;
  /// Name of the compared file.
  std::string compared;
};

/// Re-runs the configuration stored in a manifest into `out` and compares
/// trajectory.csv (report.json when there is none) with the file next to
/// the manifest. Non-deterministic runs are compared without the wall_ms column.
RerunResult rerun_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out,
                           const IterationHook& hook = {});

}  // namespace civi::harness
