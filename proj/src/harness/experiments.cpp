#include "civi/harness/experiments.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "civi/composition/fixtures.hpp"
#include "civi/composition/rng.hpp"
#include "civi/harness/gradcheck.hpp"
#include "civi/harness/mcmc.hpp"
#include "civi/harness/metrics.hpp"
#include "civi/harness/recurrence.hpp"
#include "civi/sivi/blr.hpp"
#include "civi/sivi/pool.hpp"
#include "civi/sivi/problem.hpp"

#ifndef CIVI_VERSION
#define CIVI_VERSION "unknown"
#endif

namespace civi::harness {

namespace fs = std::filesystem;
using composition::Stream;

namespace {

/// Independent seeds for evaluation steps that sit outside the solver.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t role) {
  return composition::mix64(seed ^ composition::mix64(role + 0x5bd1e995ULL));
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Trains with the configured schedule, keeping the trajectory on disk even
/// when a step fails.
struct Training {
  solver::RunResult result;
  double seconds = 0.0;
};

Training train(const RunConfig& config, const composition::CompositionalProblem& problem,
               const solver::ScheduleConfig& schedule, const Vector& theta1, const fs::path& out,
               const IterationHook& hook) {
  const solver::CiviSolver solver(problem, schedule, config.seed, config.output);
  std::vector<solver::IterationRecord> records;
  const auto observer = [&](const solver::IterationRecord& r, const solver::OptimizerState&) {
    records.push_back(r);
    if (config.deterministic) records.back().wall_ms = 0.0;
    if (hook) hook(records.back());
  };
  const auto start = std::chrono::steady_clock::now();
  Training t;
  try {
    t.result = solver.run(theta1, observer);
  } catch (const solver::SolverError& e) {
    write_trajectory(out / "trajectory.csv", records);
    std::ofstream(out / "checkpoint.json") << e.checkpoint() << '\n';
    throw;
  }
  t.seconds = seconds_since(start);
  t.result.trajectory = records;
  write_trajectory(out / "trajectory.csv", records);
  return t;
}

Json summary_json(const SampleSummary& s) { return {{"mean", vec_json(s.mean)}, {"std", vec_json(s.std)}}; }

}  // namespace

Json run_toy(const RunConfig& config, const fs::path& out, const IterationHook& hook) {
  const sivi::TargetKind kind = sivi::parse_target_kind(config.toy.target);
  const sivi::TargetDensity target = sivi::make_toy_target(kind);
  sivi::SemiImplicitModel model = config.model;
  if (model.z_dim != 2) throw ConfigError("toy: model.z_dim must be 2");
  model.validate();
  fs::create_directories(out);

  const sivi::SiviProblem problem(model, sivi::build_pool(model, config.pool_size, config.seed), target);
  const solver::ScheduleConfig schedule = resolve_schedule(config, model);
  auto rng_init = composition::make_stream(config.seed, 0, Stream::kInit);
  const ParamVector theta1 = model.init(rng_init);

  const ToyOptions& opt = config.toy;
  const KlEstimate kl_init =
      kl_estimate(model, theta1, target, opt.kde_samples, opt.eval_samples, derived_seed(config.seed, 1));
  const Training tr = train(config, problem, schedule, theta1, out, hook);
  const ParamVector& theta = tr.result.theta_out;
  const KlEstimate kl_final =
      kl_estimate(model, theta, target, opt.kde_samples, opt.eval_samples, derived_seed(config.seed, 2));

  auto rng_dump = composition::make_stream(derived_seed(config.seed, 3), 0, Stream::kOutput);
  const Matrix samples = model.sample(theta, opt.dump_samples, rng_dump);
  write_samples(out / "samples.csv", samples);
  auto rng_kde = composition::make_stream(derived_seed(config.seed, 4), 0, Stream::kOutput);
  const Kde kde(model.sample(theta, opt.kde_samples, rng_kde));
  write_grid(out / "learned_grid.csv", opt.extent, opt.grid, [&](const Vector& z) { return kde.log_density(z); });
  write_grid(out / "target_grid.csv", opt.extent, opt.grid, [&](const Vector& z) { return target(z); });
  const Matrix centers = kmeans2(samples);

  const solver::IterationRecord& last = tr.result.trajectory.back();
  Json report{{"experiment", "toy"},
              {"target", opt.target},
              {"iterations", schedule.iterations},
              {"kl_init", kl_init.kl},
              {"kl_init_std_error", kl_init.std_error},
              {"kl_final", kl_final.kl},
              {"kl_final_std_error", kl_final.std_error},
              {"kl_reduction", (kl_init.kl - kl_final.kl) / kl_init.kl},
              {"centers", {vec_json(centers.col(0)), vec_json(centers.col(1))}},
              {"final_loss", last.loss},
              {"g_evals", last.g_evals},
              {"train_seconds", config.deterministic ? 0.0 : tr.seconds}};
  write_json(out / "report.json", report);
  return report;
}

Json run_blr(const RunConfig& config, const fs::path& out, const IterationHook& hook) {
  const BlrOptions& opt = config.blr;
  auto data = std::make_shared<sivi::BlrDataset>();
  fs::create_directories(out);
  if (!opt.data.empty()) {
    *data = sivi::load_blr_csv(opt.data, opt.standardize);
  } else {
    *data = sivi::synthesize_blr(opt.synthetic_rows, opt.synthetic_dim, opt.synthetic_seed);
    if (opt.standardize) sivi::standardize_features(*data);
    sivi::write_blr_csv(*data, out / "data.csv");
  }
  data->prior_variance = opt.prior_variance;
  data->validate();
  const Index d = data->dim();

  sivi::SemiImplicitModel model = config.model;
  model.z_dim = d;
  model.mean_net.input_dim = model.eps_dim;
  model.mean_net.output_dim = d;
  model.validate();
  const sivi::TargetDensity target = sivi::make_blr_target(data);
  const sivi::SiviProblem problem(model, sivi::build_pool(model, config.pool_size, config.seed), target);
  const solver::ScheduleConfig schedule = resolve_schedule(config, model);
  auto rng_init = composition::make_stream(config.seed, 0, Stream::kInit);
  const ParamVector theta1 = model.init(rng_init);

  const Training tr = train(config, problem, schedule, theta1, out, hook);
  auto rng_post = composition::make_stream(derived_seed(config.seed, 3), 0, Stream::kOutput);
  const Matrix posterior = model.sample(tr.result.theta_out, opt.posterior_samples, rng_post);
  write_samples(out / "posterior_samples.csv", posterior);
  const SampleSummary civi = summarize(posterior);

  Json report{{"experiment", "blr"},
              {"preset", opt.preset},
              {"rows", data->size()},
              {"dim", d},
              {"iterations", schedule.iterations},
              {"civi", summary_json(civi)},
              {"final_loss", tr.result.trajectory.back().loss},
              {"train_seconds", config.deterministic ? 0.0 : tr.seconds}};
  if (opt.mcmc_steps > 0) {
    McmcOptions mo;
    mo.steps = opt.mcmc_steps;
    mo.keep = opt.posterior_samples;
    const auto start = std::chrono::steady_clock::now();
    const McmcResult chain = random_walk_metropolis(
        [&](const Vector& z) { return sivi::blr_log_joint(*data, z).value; }, Vector::Zero(d), mo,
        derived_seed(config.seed, 5));
    write_samples(out / "mcmc_samples.csv", chain.samples);
    const SampleSummary mc = summarize(chain.samples);
    report["mcmc"] = summary_json(mc);
    report["mcmc"]["acceptance"] = chain.acceptance;
    report["mcmc"]["warning"] = chain.warning;
    report["mcmc"]["seconds"] = config.deterministic ? 0.0 : seconds_since(start);
    report["max_mean_abs_diff"] = (civi.mean - mc.mean).cwiseAbs().maxCoeff();
    report["max_std_rel_diff"] = ((civi.std - mc.std).cwiseAbs().array() / mc.std.array()).maxCoeff();
  }
  write_json(out / "report.json", report);
  return report;
}

Json run_bias_rate(const RunConfig& config, const fs::path& out, const IterationHook& hook) {
  const BiasRateOptions& opt = config.bias_rate;
  if (opt.n < 1) throw ConfigError("bias_rate.n must be at least 1");
  if (opt.repetitions < 1) throw ConfigError("bias_rate.repetitions must be at least 1");
  if (!(opt.sigma > 0.0)) throw ConfigError("bias_rate.sigma must be positive");
  std::vector<Index> checkpoints = opt.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty() || checkpoints.front() < 1 || checkpoints.back() > config.schedule.iterations ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end()) {
    throw ConfigError("bias_rate.checkpoints must be distinct values in [1, iterations]");
  }
  fs::create_directories(out);
  const composition::LognormalProblem problem(-Matrix::Identity(opt.n, opt.n), Matrix::Identity(opt.n, opt.n),
                                              opt.sigma);
  const solver::ScheduleConfig schedule = resolve_schedule(config, sivi::SemiImplicitModel{});
  const Vector theta0 = Vector::Constant(opt.n, opt.theta0);

  const std::size_t c = checkpoints.size();
  std::vector<double> sum(c, 0.0);
  std::vector<double> sum_sq(c, 0.0);
  const auto start = std::chrono::steady_clock::now();
  for (Index rep = 0; rep < opt.repetitions; ++rep) {
    const std::uint64_t seed = rep == 0 ? config.seed : derived_seed(config.seed, 100 + static_cast<std::uint64_t>(rep));
    const solver::CiviSolver solver(problem, schedule, seed, config.output);
    solver::OptimizerState state = solver.init(theta0);
    std::vector<solver::IterationRecord> records;
    std::size_t next = 0;
    while (state.t < schedule.iterations) {
      solver::IterationRecord rec = solver.step(state);
      if (next < c && rec.t == checkpoints[next]) {
        const double b = rec.bias.value_or(0.0);
        sum[next] += b;
        sum_sq[next] += b * b;
        ++next;
      }
      if (rep == 0) {
        if (hook) hook(rec);
        records.push_back(rec);
      }
    }
    if (rep == 0) write_trajectory(out / "trajectory.csv", records);
  }

  const double r = static_cast<double>(opt.repetitions);
  std::vector<double> log_t;
  std::vector<double> log_b;
  Json rows = Json::array();
  std::ofstream csv(out / "bias_rate.csv");
  csv << "t,mean_sq_error,std_error\n";
  bool all_zero = true;
  for (std::size_t i = 0; i < c; ++i) {
    const double mean = sum[i] / r;
    const double var = opt.repetitions > 1 ? std::max(0.0, (sum_sq[i] - r * mean * mean) / (r - 1.0)) : 0.0;
    const double se = std::sqrt(var / r);
    char line[128];
    std::snprintf(line, sizeof line, "%lld,%.17g,%.17g\n", static_cast<long long>(checkpoints[i]), mean, se);
    csv << line;
    rows.push_back({{"t", checkpoints[i]}, {"mean_sq_error", mean}, {"std_error", se}});
    if (mean > 0.0) {
      all_zero = false;
      log_t.push_back(std::log10(static_cast<double>(checkpoints[i])));
      log_b.push_back(std::log10(mean));
    }
  }
  Json report{{"experiment", "bias-rate"},
              {"n", opt.n},
              {"repetitions", opt.repetitions},
              {"checkpoints", rows},
              {"all_zero", all_zero},
              {"seconds", config.deterministic ? 0.0 : seconds_since(start)}};
  if (log_t.size() == c && c >= 3) {
    const OlsFit fit = ols_fit(log_t, log_b);
    report["slope"] = fit.slope;
    report["intercept"] = fit.intercept;
    report["slope_std_error"] = fit.slope_std_error;
    report["slope_ci95"] = {fit.ci_low, fit.ci_high};
  }
  write_json(out / "report.json", report);
  return report;
}

Json run_gradcheck_experiment(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  Json report = run_gradcheck(config.gradcheck, config.seed).to_json();
  report["experiment"] = "gradcheck";
  write_json(out / "report.json", report);
  return report;
}

Json run_recurrence_experiment(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  const RecurrenceReport r = run_recurrence(config.recurrence);
  Json report{{"experiment", "recurrence"},
              {"c_a", r.c_a},
              {"t0", r.t0},
              {"max_scaled", r.max_scaled},
              {"argmax_t", r.argmax_t},
              {"final_value", r.final_value},
              {"went_negative", r.went_negative},
              {"holds", r.holds}};
  write_json(out / "report.json", report);
  return report;
}

Json make_manifest(const RunConfig& config) {
  return {{"format", "civi-manifest/1"},
          {"tool_version", CIVI_VERSION},
          {"experiment", to_string(config.experiment)},
          {"seed", config.seed},
          {"deterministic", config.deterministic},
          {"config_hash", config.hash()},
          {"config", config.to_json()},
          {"build",
           {{"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)}}}};
}

Json run_experiment(const RunConfig& config, const fs::path& out, const IterationHook& hook) {
  fs::create_directories(out);
  write_json(out / "manifest.json", make_manifest(config));
  switch (config.experiment) {
    case Experiment::kToy: return run_toy(config, out, hook);
    case Experiment::kBlr: return run_blr(config, out, hook);
    case Experiment::kBiasRate: return run_bias_rate(config, out, hook);
    case Experiment::kGradcheck: return run_gradcheck_experiment(config, out);
    case Experiment::kRecurrence: return run_recurrence_experiment(config, out);
  }
  throw ConfigError("unknown experiment");
}

namespace {

/// Drops the wall_ms column (the fifth) from every line.
std::string without_wall_clock(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() > 4) fields.erase(fields.begin() + 4);
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += '\n';
  }
  return out;
}

}  // namespace

RerunResult rerun_manifest(const fs::path& manifest, const fs::path& out, const IterationHook& hook) {
  Json m;
  try {
    m = Json::parse(read_file(manifest));
  } catch (const Json::parse_error& e) {
    throw ConfigError("manifest '" + manifest.string() + "': " + e.what());
  }
  if (!m.is_object() || m.value("format", "") != "civi-manifest/1" || !m.contains("config")) {
    throw ConfigError("manifest '" + manifest.string() + "': not a civi-manifest/1 document");
  }
  const RunConfig config = config_from_json(parse_experiment(m.at("experiment").get<std::string>()), m.at("config"));
  if (config.hash() != m.value("config_hash", "")) {
    throw ConfigError("manifest '" + manifest.string() + "': config hash does not match its config");
  }
  RerunResult r;
  r.report = run_experiment(config, out, hook);
  const fs::path dir = manifest.parent_path();
  r.compared = fs::exists(dir / "trajectory.csv") ? "trajectory.csv" : "report.json";
  if (fs::exists(dir / r.compared) && fs::exists(out / r.compared)) {
    std::string before = read_file(dir / r.compared);
    std::string after = read_file(out / r.compared);
    if (r.compared == "trajectory.csv" && !config.deterministic) {
      before = without_wall_clock(before);
      after = without_wall_clock(after);
    }
    r.identical = before == after;
  }
  return r;
}

}  // namespace civi::harness
