// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// to run a subset; with no arguments all ten run.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "civi/baselines/nmc.hpp"
#include "civi/composition/fixtures.hpp"
#include "civi/composition/oracles.hpp"
#include "civi/harness/config.hpp"
#include "civi/harness/experiments.hpp"
#include "civi/harness/gradcheck.hpp"
#include "civi/harness/metrics.hpp"
#include "civi/harness/recurrence.hpp"
#include "civi/sivi/pool.hpp"
#include "civi/sivi/problem.hpp"
#include "civi/sketch/sketch.hpp"
#include "civi/solver/solver.hpp"
#include "civi/solver/updates.hpp"

namespace {

using namespace civi;
using harness::Experiment;
using harness::Json;
using harness::RunConfig;
namespace fs = std::filesystem;
using Big = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<250>>;

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "civi_acceptance" / name;
  fs::remove_all(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

// 1. Mean over all C(5, d) subsets of the sketched product equals the dense product.
Outcome sketch_unbiasedness() {
  constexpr Index n = 5;
  constexpr Index p = 3;
  std::mt19937_64 rng(11);
  const composition::LognormalProblem problem(random_matrix(n, p, rng, 0.7), random_matrix(n, p, rng, 0.3), 0.6);
  const Vector theta = random_matrix(p, 1, rng, 0.5).col(0);
  const Vector log_y = random_matrix(n, 1, rng, 0.5).col(0);
  const composition::OracleFBatch f = composition::oracle_f(log_y, 3 * n, rng);
  const composition::OracleGBatch g = composition::oracle_g(problem, theta, 20, rng);
  const Vector exact = g.mean_jacobian().transpose() * f.mean_gradient(n);
  const double scale = std::max(1.0, exact.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Index d = 1; d <= n; ++d) {
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + d, true);
    Vector total = Vector::Zero(p);
    int subsets = 0;
    do {
      composition::Columns s;
      for (Index i = 0; i < n; ++i)
        if (mask[static_cast<std::size_t>(i)]) s.push_back(i);
      total += sketch::sketch_gradient_subset(f, g, log_y, s, static_cast<double>(n) / static_cast<double>(d));
      ++subsets;
    } while (std::prev_permutation(mask.begin(), mask.end()));
    worst = std::max(worst, (total / subsets - exact).cwiseAbs().maxCoeff() / scale);
  }
  return {worst <= 1e-12, fmt("max scaled deviation %.3g over d = 1..5 (limit 1e-12)", worst)};
}

// 2. Log-log slope of the mean squared gradient error on the lognormal fixture.
Outcome bias_decay() {
  const RunConfig c = harness::default_config(Experiment::kBiasRate);
  const Json r = harness::run_bias_rate(c, scratch("bias-rate"));
  if (!r.contains("slope")) return {false, "no slope: some checkpoint has zero error"};
  const double slope = r.at("slope").get<double>();
  return {slope >= -1.1 && slope <= -0.5,
          fmt("slope %.3f, 95%% CI [%.3f, %.3f] (limit [-1.1, -0.5])", slope, r.at("slope_ci95")[0].get<double>(),
              r.at("slope_ci95")[1].get<double>())};
}

// 3. Finite-difference sweep over every differentiable operation.
Outcome gradient_correctness() {
  const harness::GradcheckOptions o;
  const harness::GradcheckReport r = harness::run_gradcheck(o, 1);
  double worst = 0.0;
  std::string worst_name;
  Index min_trials = std::numeric_limits<Index>::max();
  for (const auto& e : r.entries) {
    min_trials = std::min(min_trials, e.trials);
    if (e.max_error >= worst) {
      worst = e.max_error;
      worst_name = e.name;
    }
  }
  const bool pass = r.pass() && min_trials >= 100 && o.tolerance == 1e-4;
  return {pass, fmt("%g entries, >= %g trials each, worst %.3g", static_cast<double>(r.entries.size()),
                    static_cast<double>(min_trials), worst) +
                    " (" + worst_name + ", limit 1e-4)"};
}

// 4. Log-domain smoothing and weights against the linear domain in range, and
// the series branch against a 250-digit reference up to 700-nat gaps.
Outcome log_domain_fidelity() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mag(-300.0, 300.0);
  std::uniform_real_distribution<double> b01(1e-3, 1.0);
  double linear_err = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double ly = mag(rng), lg = mag(rng), beta = b01(rng);
    Vector v = Vector::Constant(1, ly);
    solver::smooth_update_log(v, Vector::Constant(1, lg), beta, {0});
    const double linear = std::log((1.0 - beta) * std::exp(ly) + beta * std::exp(lg));
    linear_err = std::max(linear_err, std::abs(v(0) - linear) / std::max(1.0, std::abs(linear)));

    const Index count = 1 + static_cast<Index>(rng() % 5);
    const Index k1 = count + static_cast<Index>(rng() % 50);
    const sketch::SparseOuterGrad k = sketch::log_scale_combine(
        {0}, {count}, Vector::Constant(1, lg / 2.0), Vector::Constant(1, ly / 2.0), k1, 1);
    const double lin_w = std::log(static_cast<double>(count) * std::exp(lg / 2.0) /
                                  (static_cast<double>(k1) * std::exp(ly / 2.0)));
    linear_err = std::max(linear_err, std::abs(k.log_weight(0) - lin_w) / std::max(1.0, std::abs(lin_w)));
  }

  double big_err = 0.0;
  double series_err = 0.0;
  for (double gap = solver::kTaylorGap; gap <= 700.0; gap += 0.25) {
    const double hi = mag(rng) / 3.0;
    const double lo = hi - gap;
    const double beta = b01(rng);
    Vector v = Vector::Constant(1, hi);
    solver::smooth_update_log(v, Vector::Constant(1, lo), beta, {0});
    const Big ref = log((1 - Big(beta)) * exp(Big(hi)) + Big(beta) * exp(Big(lo)));
    big_err = std::max(big_err, std::abs(v(0) - ref.convert_to<double>()) / std::max(1.0, std::abs(v(0))));
    const double added = solver::log_add(lo, hi);
    const Big ref_add = log(exp(Big(hi)) + exp(Big(lo)));
    big_err = std::max(big_err, std::abs(added - ref_add.convert_to<double>()) / std::max(1.0, std::abs(added)));

    const double r = std::exp(-gap);
    const Big ref_series = log1p(Big(r));
    const Big rel = Big(solver::log1p_series(r)) / ref_series - 1;
    series_err = std::max(series_err, std::abs(rel.convert_to<double>()));
  }
  return {linear_err <= 1e-10 && big_err <= 1e-12 && series_err <= 1e-12,
          fmt("linear %.3g (limit 1e-10), extended %.3g, series %.3g (limit 1e-12)", linear_err, big_err,
              series_err)};
}

// 5. Two-modal toy with its table settings.
Outcome toy_two_modal() {
  const RunConfig c = harness::default_config(Experiment::kToy, "two-modal");
  const auto start = std::chrono::steady_clock::now();
  const Json r = harness::run_toy(c, scratch("toy"));
  const double wall = seconds_since(start);
  const double reduction = r.at("kl_reduction").get<double>();
  double worst = 0.0;
  const double expect[2] = {-2.0, 2.0};
  for (int k = 0; k < 2; ++k) {
    const double x = r.at("centers")[k][0].get<double>() - expect[k];
    const double y = r.at("centers")[k][1].get<double>();
    worst = std::max(worst, std::hypot(x, y));
  }
  return {reduction >= 0.5 && worst <= 0.5 && wall <= 74.0,
          fmt("KL %.3f -> %.3f (reduction %.0f%%, limit 50%%), centre error %.3f (limit 0.5), ",
              r.at("kl_init").get<double>(), r.at("kl_final").get<double>(), 100.0 * reduction, worst) +
              fmt("wall %.1f s (limit 74 s)", wall)};
}

// 6. BLR posterior moments against a 10^6-step Metropolis chain.
Outcome blr_oracle() {
  const RunConfig c = harness::load_config(Experiment::kBlr, fs::path(CIVI_SOURCE_DIR) / "configs" /
                                                                 "blr_synthetic_acceptance.json");
  if (c.blr.mcmc_steps != 1000000 || c.blr.synthetic_rows != 200 || c.blr.synthetic_dim != 2) {
    return {false, "acceptance config no longer describes D = 2, N = 200 with 10^6 chain steps"};
  }
  const auto start = std::chrono::steady_clock::now();
  const Json r = harness::run_blr(c, scratch("blr"));
  const double wall = seconds_since(start);
  const double dmean = r.at("max_mean_abs_diff").get<double>();
  const double dstd = r.at("max_std_rel_diff").get<double>();
  return {dmean <= 0.15 && dstd <= 0.3 && wall < 300.0 && !r.at("mcmc").at("warning").get<bool>(),
          fmt("mean diff %.3f (limit 0.15), std rel diff %.1f%% (limit 30%%), wall %.0f s (limit 300 s)", dmean,
              100.0 * dstd, wall)};
}

// 7. N(0, 1) prior and one N(1; z, 1) observation: the minimized negative
// ELBO must reach -log N(1; 0, 2).
Outcome conjugate_evidence() {
  sivi::SemiImplicitModel m;
  m.eps_dim = 1;
  m.eps_variance = 1.0;
  m.z_dim = 1;
  m.mean_net = diffcore::MlpSpec{1, {8}, 1, diffcore::Activation::kTanh};
  m.cov_kind = diffcore::FactorKind::kDiagonal;
  sivi::TargetDensity target;
  target.dim = 1;
  target.log_density = [](const Vector& z) {
    const double x = z(0);
    diffcore::ValueGrad vg;
    vg.value = -std::log(2.0 * kPi) - 0.5 * x * x - 0.5 * (1.0 - x) * (1.0 - x);
    vg.grad = Vector::Constant(1, 1.0 - 2.0 * x);
    return vg;
  };
  const double evidence = -(-0.5 * std::log(4.0 * kPi) - 0.25);

  solver::ScheduleConfig s;
  s.batch_growth = solver::BatchGrowth::kConstant;
  s.c1 = 32;
  s.c2 = 100;
  s.c3 = 200;
  s.c_alpha = 1e-2;
  s.c_beta = 0.9;
  s.c_gamma = 0.9;
  s.mu = 0.999;
  s.iterations = 1000;
  const sivi::SiviProblem problem(m, sivi::build_pool(m, 128, 7), target);
  std::mt19937_64 rng(7);
  const solver::CiviSolver solver(problem, s, 7, solver::OutputMode::kFinal);
  const solver::RunResult run = solver.run(m.init(rng));
  const double nelbo = harness::negative_elbo(m, run.theta_out, target, 20000, 2000, 8);
  const double gap = std::abs(nelbo - evidence);
  return {gap <= 0.05, fmt("negative ELBO %.4f vs -log p(x) %.4f, gap %.4f (limit 0.05)", nelbo, evidence, gap)};
}

// 8. The step-size recurrence with the default exponents stays below its bound.
Outcome recurrence_bound() {
  const harness::RecurrenceReport r = harness::run_recurrence(harness::RecurrenceCase{});
  return {r.holds, fmt("max A_t t^0.8 = %.2f at t = %g, C_A = %.2f, t0 = %g", r.max_scaled,
                       static_cast<double>(r.argmax_t), r.c_a, static_cast<double>(r.t0))};
}

// 9. g-evaluations to reach optimum + 5e-3 on the lognormal fixture, CI-VI
// against NMC-ADAM with M = 10 (best of three learning rates per seed).
Outcome nmc_ordering() {
  constexpr Index n = 4;
  constexpr Index iters = 3000;
  constexpr double kThreshold = 0.5 + 5e-3;
  const composition::LognormalProblem problem = composition::LognormalProblem::standard(n);
  const Vector theta0 = Vector::Constant(n, 0.5);
  const double never = std::numeric_limits<double>::infinity();
  std::vector<double> civi_evals;
  std::vector<double> nmc_evals;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    solver::ScheduleConfig s;
    s.batch_growth = solver::BatchGrowth::kConstant;
    s.c1 = 4;
    s.c2 = 10;
    s.c3 = 10;
    s.c_alpha = 1e-2;
    s.c_beta = 0.9;
    s.c_gamma = 0.9;
    s.mu = 0.999;
    s.iterations = iters;
    const solver::CiviSolver solver(problem, s, seed);
    double first = never;
    solver.run(theta0, [&](const solver::IterationRecord& r, const solver::OptimizerState& st) {
      if (first == never && *problem.exact_loss(st.theta) <= kThreshold) first = static_cast<double>(r.g_evals);
    });
    civi_evals.push_back(first);

    double best = never;
    for (double lr : {1e-3, 3e-3, 1e-2}) {
      baselines::NmcConfig c;
      c.outer = n;
      c.inner = 10;
      c.optimizer = baselines::NmcOptimizer::kAdam;
      c.lr.eta = lr;
      c.iterations = iters;
      double hit = never;
      baselines::run_nmc(problem, theta0, c, seed, [&](const baselines::NmcRecord& r, const Vector& th) {
        if (hit == never && *problem.exact_loss(th) <= kThreshold) hit = static_cast<double>(r.g_evals);
      });
      best = std::min(best, hit);
    }
    nmc_evals.push_back(best);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[4] + v[5]);
  };
  const double mc = median(civi_evals);
  const double mn = median(nmc_evals);
  return {mc < mn, fmt("median g-evaluations to loss <= %.3f: CI-VI %.0f, NMC-ADAM (M = 10) %.0f", kThreshold, mc,
                       mn)};
}

// 10. Manifests re-run into identical trajectory files.
Outcome determinism() {
  std::vector<RunConfig> configs;
  RunConfig toy = harness::default_config(Experiment::kToy, "banana");
  toy.schedule.iterations = 15;
  toy.pool_size = 64;
  toy.schedule.c1 = 16;
  toy.schedule.c2 = 32;
  toy.schedule.c3 = 32;
  toy.schedule.d_t = 16;
  toy.toy.kde_samples = toy.toy.eval_samples = toy.toy.dump_samples = 200;
  toy.toy.grid = 10;
  configs.push_back(toy);
  RunConfig blr = harness::default_config(Experiment::kBlr, "synthetic");
  blr.schedule.iterations = 10;
  blr.pool_size = 64;
  blr.schedule.c1 = 8;
  blr.schedule.c2 = 32;
  blr.schedule.c3 = 32;
  blr.schedule.d_t = 8;
  blr.model.mean_net.hidden = {16, 16};
  blr.blr.mcmc_steps = 20000;
  blr.blr.posterior_samples = 500;
  configs.push_back(blr);
  RunConfig bias = harness::default_config(Experiment::kBiasRate);
  bias.schedule.iterations = 200;
  bias.bias_rate.repetitions = 2;
  bias.bias_rate.checkpoints = {10, 100, 200};
  configs.push_back(bias);
  const std::size_t timed = configs.size();
  for (std::size_t i = 0; i < timed; ++i) {
    configs.push_back(configs[i]);
    configs.back().deterministic = true;
  }

  int identical = 0;
  std::string failed;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string name = harness::to_string(configs[i].experiment) + (configs[i].deterministic ? "-det" : "");
    const fs::path a = scratch(name + "-a");
    const fs::path b = scratch(name + "-b");
    harness::run_experiment(configs[i], a);
    const harness::RerunResult r = harness::rerun_manifest(a / "manifest.json", b);
    bool same = r.identical && r.compared == "trajectory.csv";
    if (configs[i].deterministic) {
      std::ifstream fa(a / "trajectory.csv");
      std::ifstream fb(b / "trajectory.csv");
      std::stringstream sa, sb;
      sa << fa.rdbuf();
      sb << fb.rdbuf();
      same = same && sa.str() == sb.str() && !sa.str().empty();
    }
    if (same) {
      ++identical;
    } else {
      failed += " " + name;
    }
  }
  return {identical == static_cast<int>(configs.size()),
          fmt("%g of %g re-runs identical (deterministic runs byte-for-byte, timed runs without wall_ms)",
              identical, static_cast<double>(configs.size())) +
              (failed.empty() ? "" : "; differing:" + failed)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double limit_seconds;  // 0: no runtime limit
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "sketch unbiasedness (exhaustive)", sketch_unbiasedness, 1.0},
      {2, "bias decay rate", bias_decay, 600.0},
      {3, "gradient correctness", gradient_correctness, 120.0},
      {4, "log-domain fidelity", log_domain_fidelity, 30.0},
      {5, "toy two-modal", toy_two_modal, 0.0},
      {6, "BLR oracle agreement", blr_oracle, 300.0},
      {7, "conjugate evidence", conjugate_evidence, 60.0},
      {8, "recurrence bound", recurrence_bound, 10.0},
      {9, "NMC baseline ordering", nmc_ordering, 0.0},
      {10, "manifest determinism", determinism, 0.0},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(start);
    const bool in_time = c.limit_seconds <= 0.0 || secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("C%d %s %s: %s [%.2f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.limit_seconds > 0.0 ? fmt(", limit %g s", c.limit_seconds).c_str() : "");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
