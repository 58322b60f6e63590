#include "civi/harness/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>

#include "civi/composition/fixtures.hpp"
#include "civi/composition/oracles.hpp"
#include "civi/composition/rng.hpp"
#include "civi/diffcore/gaussian.hpp"
#include "civi/diffcore/gradcheck.hpp"
#include "civi/diffcore/mlp.hpp"
#include "civi/diffcore/tape.hpp"
#include "civi/sivi/blr.hpp"
#include "civi/sivi/pool.hpp"
#include "civi/sivi/problem.hpp"
#include "civi/sketch/sketch.hpp"

namespace civi::harness {

namespace {

using diffcore::Tape;
using diffcore::Var;
using Inputs = std::vector<Matrix>;
using InputFn = std::function<Inputs(std::mt19937_64&)>;
using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;
using ValueGradFn = std::function<diffcore::ValueGrad(const Vector&)>;
using Fixture = std::pair<ValueGradFn, Vector>;

struct E2eFixture {
  std::shared_ptr<const composition::CompositionalProblem> problem;
  Vector theta;
  Matrix draws;
};

Matrix normal(Index r, Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

/// Entries at least `gap` away from zero, so kinks stay outside the stencil.
Matrix away_from_zero(Index r, Index c, std::mt19937_64& rng, double gap = 0.05) {
  Matrix m = normal(r, c, rng);
  return m.unaryExpr([gap](double x) { return x >= 0.0 ? x + gap : x - gap; });
}

Matrix positive(Index r, Index c, std::mt19937_64& rng) {
  return (normal(r, c, rng).array().abs() + 0.3).matrix();
}

Vector pack(const Inputs& in) {
  Index total = 0;
  for (const Matrix& m : in) total += m.size();
  Vector x(total);
  Index at = 0;
  for (const Matrix& m : in) {
    x.segment(at, m.size()) = m.reshaped();
    at += m.size();
  }
  return x;
}

Inputs unpack(const Vector& x, const Inputs& shapes) {
  Inputs out;
  Index at = 0;
  for (const Matrix& m : shapes) {
    out.push_back(x.segment(at, m.size()).reshaped(m.rows(), m.cols()));
    at += m.size();
  }
  return out;
}

/// Round-off in a difference quotient grows with |f|, so the floor does too.
double error_floor(double value) { return kGradcheckFloor * std::max(1.0, std::abs(value)); }

double end_to_end_error(const composition::CompositionalProblem& problem, const Vector& theta,
                        const Matrix& draws, const GradcheckOptions& options) {
  const Index n = problem.pool_size();
  composition::Columns all;
  for (Index k = 0; k < n; ++k) all.push_back(k);
  const composition::OracleGBatch g(problem, theta, draws);
  const Vector log_y = g.log_mean(all);
  const composition::OracleFBatch f = composition::OracleFBatch::from_indices(all, log_y);
  std::mt19937_64 unused(0);
  const Vector ad = sketch::sketch_gradient(f, g, log_y, sketch::SketchPlan{n, sketch::SketchMode::kUniform}, unused);
  const auto loss = [&](const Vector& th) {
    return composition::log_mean_rows(problem.log_values(th, draws, all)).mean();
  };
  const Vector fd = diffcore::five_point_difference(loss, theta, options.step);
  return diffcore::max_relative_error(ad, fd, error_floor(loss(theta)));
}

class Sweep {
 public:
  Sweep(const GradcheckOptions& options, std::uint64_t seed) : options_(options), seed_(seed) {}

  /// Recorded op reduced with fixed random weights; every input is differentiated.
  void op(const std::string& name, const InputFn& inputs, const BuildFn& build) {
    auto rng = stream();
    GradcheckEntry e{name, options_.trials, 0.0, true};
    for (Index trial = 0; trial < options_.trials; ++trial) {
      const Inputs in = inputs(rng);
      Matrix w;
      {
        Tape probe;
        std::vector<Var> vars;
        for (const Matrix& m : in) vars.push_back(probe.constant(m));
        const Var out = build(probe, vars);
        w = normal(out.rows(), out.cols(), rng);
      }
      const auto eval = [&](const Vector& x, Vector* grad) {
        Tape tape;
        std::vector<Var> vars;
        for (const Matrix& m : unpack(x, in)) vars.push_back(tape.variable(m));
        const Var s = diffcore::weighted_sum(build(tape, vars), w);
        if (grad) {
          tape.backward(s);
          Inputs g;
          for (const Var& v : vars) g.push_back(tape.gradient(v));
          *grad = pack(g);
        }
        return s.scalar();
      };
      const Vector x = pack(in);
      Vector ad;
      const double value = eval(x, &ad);
      const Vector fd =
          diffcore::five_point_difference([&](const Vector& p) { return eval(p, nullptr); }, x, options_.step);
      e.max_error = std::max(e.max_error, diffcore::max_relative_error(ad, fd, error_floor(value)));
    }
    finish(e);
  }

  /// Function returning its own gradient, with the point to check it at.
  void function(const std::string& name, const std::function<Fixture(std::mt19937_64&)>& make) {
    auto rng = stream();
    GradcheckEntry e{name, options_.trials, 0.0, true};
    for (Index trial = 0; trial < options_.trials; ++trial) {
      const auto [fn, x] = make(rng);
      const diffcore::ValueGrad at = fn(x);
      const Vector fd =
          diffcore::five_point_difference([&](const Vector& p) { return fn(p).value; }, x, options_.step);
      e.max_error = std::max(e.max_error, diffcore::max_relative_error(at.grad, fd, error_floor(at.value)));
    }
    finish(e);
  }

  /// End-to-end estimate on a fresh problem and draws per trial.
  void end_to_end(const std::string& name, const std::function<E2eFixture(std::mt19937_64&)>& make) {
    auto rng = stream();
    GradcheckEntry e{name, options_.trials, 0.0, true};
    for (Index trial = 0; trial < options_.trials; ++trial) {
      const E2eFixture fx = make(rng);
      e.max_error = std::max(e.max_error, end_to_end_error(*fx.problem, fx.theta, fx.draws, options_));
    }
    finish(e);
  }

  GradcheckReport take() {
    report_.tolerance = options_.tolerance;
    return std::move(report_);
  }

 private:
  std::mt19937_64 stream() {
    return composition::make_stream(seed_, static_cast<std::uint64_t>(report_.entries.size()),
                                    composition::Stream::kEvaluation);
  }
  void finish(GradcheckEntry& e) {
    e.pass = e.max_error < options_.tolerance;
    report_.entries.push_back(e);
  }

  GradcheckOptions options_;
  std::uint64_t seed_;
  GradcheckReport report_;
};

/// Smallest |pre-activation| over every hidden unit and input column.
double min_abs_preactivation(const diffcore::MlpSpec& spec, const Vector& params, const Matrix& input) {
  const std::vector<Index> w = spec.widths();
  Matrix x = input;
  Index at = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t layer = 0; layer + 1 < w.size(); ++layer) {
    const Index in = w[layer];
    const Index out = w[layer + 1];
    const Matrix weight = params.segment(at, out * in).reshaped(out, in);
    at += out * in;
    const Matrix pre = (weight * x).colwise() + params.segment(at, out);
    at += out;
    if (layer + 2 == w.size()) break;
    lowest = std::min(lowest, pre.cwiseAbs().minCoeff());
    x = spec.activation == diffcore::Activation::kRelu ? Matrix(pre.cwiseMax(0.0)) : Matrix(pre.array().tanh());
  }
  return lowest;
}

/// Finite differences are meaningless across a ReLU kink, so ReLU fixtures
/// keep every pre-activation this far from zero (the stencil moves them by
/// at most 2 step (|input| + 1) per coordinate).
constexpr double kKinkMargin = 1e-2;

bool near_kink(const diffcore::MlpSpec& spec, const Vector& params, const Matrix& input) {
  return spec.activation == diffcore::Activation::kRelu &&
         min_abs_preactivation(spec, params, input) < kKinkMargin;
}

/// Small semi-implicit model used by the model-level entries.
sivi::SemiImplicitModel small_model(diffcore::FactorKind kind, diffcore::Activation act) {
  sivi::SemiImplicitModel m;
  m.eps_dim = 2;
  m.z_dim = 2;
  m.mean_net = diffcore::MlpSpec{2, {6}, 2, act};
  m.cov_kind = kind;
  return m;
}

/// Network weights at Xavier scale, factor entries around zero.
ParamVector random_theta(const sivi::SemiImplicitModel& m, std::mt19937_64& rng) {
  ParamVector theta = m.init(rng);
  const sivi::ParamRange cov = m.cov_group();
  theta.segment(cov.begin, cov.size()) = 0.3 * normal(cov.size(), 1, rng);
  const sivi::ParamRange mean = m.mean_group();
  theta.segment(mean.begin, mean.size()) += 0.1 * normal(mean.size(), 1, rng);
  return theta;
}

std::shared_ptr<const sivi::BlrDataset> small_blr(std::mt19937_64& rng) {
  auto data = std::make_shared<sivi::BlrDataset>(sivi::synthesize_blr(20, 2, rng()));
  data->prior_variance = 100.0;
  return data;
}

sivi::TargetDensity target_for(int which, std::mt19937_64& rng) {
  switch (which % 4) {
    case 0: return sivi::make_toy_target(sivi::TargetKind::kTwoModal);
    case 1: return sivi::make_toy_target(sivi::TargetKind::kStar);
    case 2: return sivi::make_toy_target(sivi::TargetKind::kBanana);
    default: return sivi::make_blr_target(small_blr(rng));
  }
}

}  // namespace

bool GradcheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.pass; });
}

Json GradcheckReport::to_json() const {
  Json list = Json::array();
  for (const GradcheckEntry& e : entries) {
    list.push_back({{"name", e.name}, {"trials", e.trials}, {"max_error", e.max_error}, {"pass", e.pass}});
  }
  return {{"tolerance", tolerance}, {"floor", kGradcheckFloor}, {"pass", pass()}, {"entries", list}};
}

GradcheckReport gradcheck_problem(const composition::CompositionalProblem& problem, const Vector& theta,
                                  Index draws, const GradcheckOptions& options, std::uint64_t seed) {
  GradcheckReport report;
  report.tolerance = options.tolerance;
  if (problem.param_dim() == 0 || options.trials == 0) return report;
  GradcheckEntry e{"civi gradient (d_t = n)", options.trials, 0.0, true};
  auto rng = composition::make_stream(seed, 0, composition::Stream::kEvaluation);
  for (Index trial = 0; trial < options.trials; ++trial) {
    e.max_error = std::max(e.max_error, end_to_end_error(problem, theta, problem.sample_draws(draws, rng), options));
  }
  e.pass = e.max_error < options.tolerance;
  report.entries.push_back(e);
  return report;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options, std::uint64_t seed) {
  Sweep sweep(options, seed);
  if (options.trials == 0) return sweep.take();

  const auto pair = [](Index r, Index c) {
    return [r, c](std::mt19937_64& rng) { return Inputs{normal(r, c, rng), normal(r, c, rng)}; };
  };
  const auto single = [](Index r, Index c) {
    return [r, c](std::mt19937_64& rng) { return Inputs{normal(r, c, rng)}; };
  };
  sweep.op("add", pair(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::add(v[0], v[1]); });
  sweep.op("sub", pair(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::sub(v[0], v[1]); });
  sweep.op("mul", pair(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::mul(v[0], v[1]); });
  sweep.op("scale", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::scale(v[0], -1.7); });
  sweep.op("add_scalar", single(3, 4),
           [](Tape&, const std::vector<Var>& v) { return diffcore::add_scalar(v[0], 0.4); });
  sweep.op("exp", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::exp(v[0]); });
  sweep.op("log", [](std::mt19937_64& rng) { return Inputs{positive(3, 4, rng)}; },
           [](Tape&, const std::vector<Var>& v) { return diffcore::log(v[0]); });
  sweep.op("relu", [](std::mt19937_64& rng) { return Inputs{away_from_zero(3, 4, rng)}; },
           [](Tape&, const std::vector<Var>& v) { return diffcore::relu(v[0]); });
  sweep.op("tanh", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::tanh(v[0]); });
  sweep.op("square", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::square(v[0]); });
  sweep.op("matmul", [](std::mt19937_64& rng) { return Inputs{normal(3, 4, rng), normal(4, 2, rng)}; },
           [](Tape&, const std::vector<Var>& v) { return diffcore::matmul(v[0], v[1]); });
  sweep.op("add_col", [](std::mt19937_64& rng) { return Inputs{normal(3, 4, rng), normal(3, 1, rng)}; },
           [](Tape&, const std::vector<Var>& v) { return diffcore::add_col(v[0], v[1]); });
  sweep.op("sum", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::sum(v[0]); });
  sweep.op("mean", single(3, 4), [](Tape&, const std::vector<Var>& v) { return diffcore::mean(v[0]); });
  sweep.op("rowwise_logsumexp", [](std::mt19937_64& rng) { return Inputs{normal(3, 5, rng, 3.0)}; },
           [](Tape&, const std::vector<Var>& v) { return diffcore::rowwise_logsumexp(v[0]); });
  sweep.op("slice", single(20, 1),
           [](Tape&, const std::vector<Var>& v) { return diffcore::slice(v[0], 2, 3, 4); });
  for (diffcore::FactorKind kind : {diffcore::FactorKind::kDiagonal, diffcore::FactorKind::kCholesky}) {
    const std::string tag = kind == diffcore::FactorKind::kDiagonal ? " (diagonal)" : " (cholesky)";
    const Index fs = diffcore::factor_size(kind, 2);
    sweep.op("lower_factor" + tag, [fs](std::mt19937_64& rng) { return Inputs{normal(fs + 1, 1, rng, 0.5)}; },
             [kind](Tape&, const std::vector<Var>& v) { return diffcore::lower_factor(v[0], 1, 2, kind); });
    sweep.op("pairwise_gauss_logpdf" + tag,
             [fs](std::mt19937_64& rng) {
               return Inputs{normal(2, 4, rng), normal(2, 3, rng), normal(fs, 1, rng, 0.4)};
             },
             [kind](Tape&, const std::vector<Var>& v) {
               return diffcore::pairwise_gauss_logpdf(v[0], v[1], diffcore::lower_factor(v[2], 0, 2, kind));
             });
    sweep.op("paired_gauss_logpdf" + tag,
             [fs](std::mt19937_64& rng) {
               return Inputs{normal(2, 4, rng), normal(2, 4, rng), normal(fs, 1, rng, 0.4)};
             },
             [kind](Tape&, const std::vector<Var>& v) {
               return diffcore::paired_gauss_logpdf(v[0], v[1], diffcore::lower_factor(v[2], 0, 2, kind));
             });
    sweep.op("gaussian_logpdf" + tag,
             [fs](std::mt19937_64& rng) { return Inputs{normal(2, 1, rng), normal(2 + fs, 1, rng, 0.5)}; },
             [kind](Tape&, const std::vector<Var>& v) { return diffcore::gaussian_logpdf(v[0], v[1], 2, kind); });
    sweep.op("reparam_sample" + tag,
             [fs](std::mt19937_64& rng) { return Inputs{normal(2 + fs, 1, rng, 0.5), normal(2, 1, rng)}; },
             [kind](Tape&, const std::vector<Var>& v) { return diffcore::reparam_sample(v[0], v[1], 2, kind); });
  }
  sweep.op("columnwise", single(2, 5), [](Tape&, const std::vector<Var>& v) {
    return diffcore::columnwise(v[0], sivi::make_toy_target(sivi::TargetKind::kBanana).log_density);
  });
  for (diffcore::Activation act : {diffcore::Activation::kRelu, diffcore::Activation::kTanh}) {
    const diffcore::MlpSpec spec{3, {5, 4}, 2, act};
    sweep.op("mlp_forward (" + diffcore::to_string(act) + ")",
             [spec](std::mt19937_64& rng) {
               for (;;) {
                 Matrix p = xavier_normal_init(spec, rng);
                 p += 0.1 * normal(p.rows(), 1, rng);
                 Matrix x = normal(3, 4, rng);
                 if (!near_kink(spec, p.col(0), x)) return Inputs{p, x};
               }
             },
             [spec](Tape&, const std::vector<Var>& v) { return diffcore::mlp_forward(spec, v[0], 0, v[1]); });
  }

  const auto point2 = [](std::mt19937_64& rng) -> Vector { return normal(2, 1, rng, 1.5).col(0); };
  for (sivi::TargetKind kind : {sivi::TargetKind::kTwoModal, sivi::TargetKind::kStar, sivi::TargetKind::kBanana}) {
    sweep.function("target " + sivi::to_string(kind), [kind, point2](std::mt19937_64& rng) {
      return Fixture{[kind](const Vector& z) { return sivi::toy_log_density(kind, z); }, point2(rng)};
    });
  }
  sweep.function("blr_log_joint", [point2](std::mt19937_64& rng) {
    auto data = small_blr(rng);
    return Fixture{[data](const Vector& z) { return sivi::blr_log_joint(*data, z); }, point2(rng)};
  });

  for (diffcore::FactorKind kind : {diffcore::FactorKind::kDiagonal, diffcore::FactorKind::kCholesky}) {
    for (diffcore::Activation act : {diffcore::Activation::kRelu, diffcore::Activation::kTanh}) {
      const sivi::SemiImplicitModel model = small_model(kind, act);
      const std::string tag = std::string(kind == diffcore::FactorKind::kDiagonal ? "diagonal" : "cholesky") +
                              ", " + diffcore::to_string(act);
      sweep.function("log_ratio_J (" + tag + ")", [model](std::mt19937_64& rng) {
        ParamVector theta;
        sivi::SamplePool pool;
        Vector eps_hat;
        do {
          theta = random_theta(model, rng);
          pool = sivi::build_pool(model, 3, rng());
          eps_hat = model.sample_eps(1, rng).col(0);
        } while (near_kink(model.mean_net, theta, pool.eps) || near_kink(model.mean_net, theta, eps_hat));
        const sivi::TargetDensity target = target_for(static_cast<int>(rng() % 4), rng);
        const Index j = static_cast<Index>(rng() % 3);
        return Fixture{[model, pool, j, eps_hat, target](const Vector& th) {
                         return sivi::log_ratio_J(model, pool, j, eps_hat, target, th);
                       },
                       theta};
      });
      sweep.function("SiviProblem::contract (" + tag + ")", [model](std::mt19937_64& rng) {
        const sivi::TargetDensity target = target_for(static_cast<int>(rng() % 4), rng);
        ParamVector theta;
        std::shared_ptr<sivi::SiviProblem> problem;
        Matrix draws;
        do {
          theta = random_theta(model, rng);
          problem = std::make_shared<sivi::SiviProblem>(model, sivi::build_pool(model, 5, rng()), target);
          draws = problem->sample_draws(4, rng);
        } while (near_kink(model.mean_net, theta, problem->pool().eps) || near_kink(model.mean_net, theta, draws));
        const composition::Columns cols{0, 2, 3, 2};
        const Vector w = normal(4, 1, rng).col(0);
        return Fixture{[problem, draws, cols, w](const Vector& th) {
                         const double value = composition::log_mean_rows(problem->log_values(th, draws, cols)).dot(w);
                         return diffcore::ValueGrad{value, problem->contract(th, draws, cols, w)};
                       },
                       theta};
      });
      sweep.end_to_end("civi gradient d_t = n (" + tag + ")", [model](std::mt19937_64& rng) {
        const sivi::TargetDensity target = target_for(static_cast<int>(rng() % 4), rng);
        for (;;) {
          ParamVector theta = random_theta(model, rng);
          auto problem = std::make_shared<sivi::SiviProblem>(model, sivi::build_pool(model, 6, rng()), target);
          Matrix draws = problem->sample_draws(16, rng);
          if (!near_kink(model.mean_net, theta, problem->pool().eps) && !near_kink(model.mean_net, theta, draws)) {
            return E2eFixture{problem, theta, std::move(draws)};
          }
        }
      });
    }
  }
  sweep.end_to_end("civi gradient d_t = n (lognormal)", [](std::mt19937_64& rng) {
    auto problem = std::make_shared<composition::LognormalProblem>(normal(5, 3, rng, 0.7), normal(5, 3, rng, 0.3), 0.6);
    Vector theta = normal(3, 1, rng, 0.5).col(0);
    Matrix draws = problem->sample_draws(16, rng);
    return E2eFixture{problem, theta, std::move(draws)};
  });
  return sweep.take();
}

}  // namespace civi::harness
