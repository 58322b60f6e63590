#include "civi/solver/solver.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "civi/composition/fixtures.hpp"
#include "civi/composition/oracles.hpp"
#include "civi/composition/rng.hpp"
#include "civi/sketch/sketch.hpp"
#include "civi/solver/updates.hpp"
#include "json.hpp"

namespace civi::solver {

using composition::Columns;
using composition::Stream;
using nlohmann::json;

namespace {

constexpr const char* kStateVersion = "civi-state/1";

std::string hex(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double unhex(const json& j) {
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("checkpoint: cannot parse number '" + s + "'");
  }
  return x;
}

json hex_vector(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(hex(v(i)));
  return a;
}

Vector read_vector(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = unhex(a[i]);
  return v;
}

}  // namespace

OutputMode parse_output_mode(const std::string& name) {
  if (name == "uniform") return OutputMode::kUniform;
  if (name == "final") return OutputMode::kFinal;
  throw ConfigError("unknown output mode '" + name + "' (expected uniform or final)");
}

std::string to_string(OutputMode mode) { return mode == OutputMode::kFinal ? "final" : "uniform"; }

std::vector<Columns> partition_chunks(Index n, Index chunks) {
  if (chunks < 1 || chunks > n) {
    throw ConfigError("partition_chunks: chunk count must lie in [1, n]");
  }
  std::vector<Columns> out(static_cast<std::size_t>(chunks));
  for (Index c = 0; c < chunks; ++c) {
    const Index begin = c * n / chunks;
    const Index end = (c + 1) * n / chunks;
    for (Index k = begin; k < end; ++k) out[static_cast<std::size_t>(c)].push_back(k);
  }
  return out;
}

std::string OptimizerState::to_json() const {
  json j;
  j["version"] = kStateVersion;
  j["theta"] = hex_vector(theta);
  j["m"] = hex_vector(m);
  j["v"] = hex_vector(v);
  j["z"] = hex_vector(z);
  j["log_y"] = hex_vector(log_y);
  j["t"] = t;
  j["chunks"] = chunks;
  j["active_chunk"] = active_chunk;
  j["rotations"] = rotations;
  j["initialized"] = initialized;
  j["reservoir"] = hex_vector(reservoir);
  j["g_evals"] = g_evals;
  return j.dump();
}

OptimizerState OptimizerState::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  if (!j.is_object() || j.value("version", "") != kStateVersion) {
    throw ConfigError(std::string("checkpoint: expected version ") + kStateVersion);
  }
  OptimizerState s;
  try {
    s.theta = read_vector(j.at("theta"));
    s.m = read_vector(j.at("m"));
    s.v = read_vector(j.at("v"));
    s.z = read_vector(j.at("z"));
    s.log_y = read_vector(j.at("log_y"));
    s.t = j.at("t").get<Index>();
    s.chunks = j.at("chunks").get<std::vector<Columns>>();
    s.active_chunk = j.at("active_chunk").get<Index>();
    s.rotations = j.at("rotations").get<std::vector<Index>>();
    s.initialized = j.at("initialized").get<std::vector<bool>>();
    s.reservoir = read_vector(j.at("reservoir"));
    s.g_evals = j.at("g_evals").get<long long>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  const Index p = s.theta.size();
  if (s.m.size() != p || s.v.size() != p || s.z.size() != p || s.reservoir.size() != p ||
      s.chunks.empty() || s.rotations.size() != s.chunks.size() ||
      s.initialized.size() != s.chunks.size() || s.active_chunk < 0 ||
      s.active_chunk >= static_cast<Index>(s.chunks.size())) {
    throw ConfigError("checkpoint: inconsistent state shapes");
  }
  return s;
}

CiviSolver::CiviSolver(const composition::CompositionalProblem& problem, ScheduleConfig config,
                       std::uint64_t seed, OutputMode output)
    : problem_(&problem), config_(std::move(config)), seed_(seed), output_(output) {
  config_.validate(problem.pool_size(), problem.param_dim());
}

void CiviSolver::reinit_chunk(OptimizerState& state, const Vector& point, Index chunk, Index k3,
                              std::mt19937_64& rng) const {
  const Columns& cols = state.chunks[static_cast<std::size_t>(chunk)];
  const composition::OracleGBatch g = composition::oracle_g(*problem_, point, k3, rng);
  smooth_update_log(state.log_y, g.log_mean(cols), 1.0, cols);
  state.initialized[static_cast<std::size_t>(chunk)] = true;
  state.g_evals += static_cast<long long>(cols.size()) * k3;
}

OptimizerState CiviSolver::init(const Vector& theta1) const {
  const Index p = problem_->param_dim();
  const Index n = problem_->pool_size();
  if (theta1.size() != p) {
    throw DimensionError("CiviSolver::init: theta has length " + std::to_string(theta1.size()) +
                         ", problem expects " + std::to_string(p));
  }
  if (!theta1.allFinite()) {
    throw NumericError("CiviSolver::init: initial theta is not finite");
  }
  OptimizerState s;
  s.theta = theta1;
  s.m = Vector::Zero(p);
  s.v = Vector::Zero(p);
  s.z = theta1;
  s.log_y = Vector::Zero(n);
  s.chunks = partition_chunks(n, config_.chunks);
  s.rotations.assign(s.chunks.size(), 0);
  s.initialized.assign(s.chunks.size(), false);
  s.reservoir = theta1;
  auto rng = composition::make_stream(seed_, 0, Stream::kSmoothing);
  reinit_chunk(s, theta1, 0, schedule(1, config_).k3, rng);
  return s;
}

IterationRecord CiviSolver::step(OptimizerState& state) const {
  const Index t = state.t + 1;
  const OptimizerState before = state;
  try {
    const composition::CountingProblem counted(*problem_);
    const Index n = problem_->pool_size();
    const Index p = problem_->param_dim();
    if (state.theta.size() != p || state.log_y.size() != n) {
      throw DimensionError("state does not match the problem dimensions");
    }
    const ScheduleValues sv = schedule(t, config_);
    const CoordinateSchedule cs = coordinate_schedule(t, config_, p);
    const Columns& chunk = state.chunks[static_cast<std::size_t>(state.active_chunk)];
    if (!state.initialized[static_cast<std::size_t>(state.active_chunk)]) {
      throw UsageError("active chunk has no smoothing values");
    }

    // Gradients.
    auto rng_f = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kOracleF);
    auto rng_g = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kOracleG);
    auto rng_s = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kSketch);
    const composition::OracleFBatch f = composition::oracle_f(state.log_y, sv.k1, chunk, rng_f);
    const composition::OracleGBatch g = composition::oracle_g(counted, state.theta, sv.k2, rng_g);
    const sketch::SketchPlan plan{config_.sketch_size(n), config_.sketch_mode};
    const Vector grad = sketch::sketch_gradient(f, g, state.log_y, plan, rng_s);

    IterationRecord rec;
    rec.t = t;
    rec.grad_norm = grad.norm();
    rec.grad_max_abs = grad.lpNorm<Eigen::Infinity>();
    rec.alpha = sv.alpha;
    if (auto exact = problem_->exact_gradient(state.theta)) {
      rec.bias = (*exact - grad).squaredNorm();
    }

    // Primary.
    Vector theta_next = state.theta;
    primary_update(theta_next, state.m, state.v, grad, cs.alpha, cs.gamma1, cs.gamma2, config_.xi, t);

    // Auxiliary: the first step uses beta = 1 so y tracks gbar(z_2) exactly.
    const double beta = t == 1 ? 1.0 : sv.beta;
    const Vector z = extrapolate(state.theta, theta_next, beta);
    auto rng_y = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kSmoothing);
    const composition::OracleGBatch g3 = composition::oracle_g(counted, z, sv.k3, rng_y);
    const Vector log_gbar = g3.log_mean(chunk);
    smooth_update_log(state.log_y, log_gbar, beta, chunk);
    rec.loss = log_gbar.mean();

    // Output candidate theta_{t+1}, kept with probability 1/t.
    if (output_ == OutputMode::kFinal) {
      state.reservoir = theta_next;
    } else {
      auto rng_o = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kOutput);
      std::uniform_real_distribution<double> u01;
      if (u01(rng_o) * static_cast<double>(t) < 1.0) state.reservoir = theta_next;
    }
    state.theta = std::move(theta_next);
    state.z = z;
    state.t = t;
    state.g_evals += counted.values() + counted.touches();

    const Index period = config_.effective_rotation_period();
    if (period > 0 && t % period == 0) {
      const auto chunks = static_cast<Index>(state.chunks.size());
      state.active_chunk = (state.active_chunk + 1) % chunks;
      auto rng_r = composition::make_stream(seed_, static_cast<std::uint64_t>(t), Stream::kRotation);
      reinit_chunk(state, state.z, state.active_chunk, sv.k3, rng_r);
      ++state.rotations[static_cast<std::size_t>(state.active_chunk)];
    }
    if (!state.theta.allFinite()) {
      throw NumericError("parameters became non-finite");
    }
    rec.g_evals = state.g_evals;
    return rec;
  } catch (const SolverError&) {
    throw;
  } catch (const std::exception& e) {
    state = before;
    throw SolverError(t, e.what(), before.to_json());
  }
}

RunResult CiviSolver::run(OptimizerState state, const Observer& observer) const {
  RunResult out;
  const auto start = std::chrono::steady_clock::now();
  while (state.t < config_.iterations) {
    IterationRecord rec = step(state);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (observer) observer(rec, state);
    out.trajectory.push_back(rec);
  }
  out.theta_out = state.reservoir;
  out.state = std::move(state);
  return out;
}

RunResult CiviSolver::run(const Vector& theta1, const Observer& observer) const {
  return run(init(theta1), observer);
}

}  // namespace civi::solver
