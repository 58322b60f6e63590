#include <cmath>
#include <random>

#include "civi/baselines/nmc.hpp"
#include "civi/composition/fixtures.hpp"
#include "civi/diffcore/gradcheck.hpp"
#include "doctest.h"

using namespace civi;
using namespace civi::baselines;
using composition::Columns;
using composition::FunctionProblem;
using composition::LognormalProblem;

namespace {

FunctionProblem constant_problem(const Vector& g, Index p) {
  return FunctionProblem(
      g.size(), p, 2, [g](const Vector&, const Vector&) { return g; },
      [g, p](const Vector&, const Vector&) { return Matrix::Zero(g.size(), p); });
}

Vector vec1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_CASE("nmc_loss_grad: fixtures") {
  std::mt19937_64 rng(1);
  const FunctionProblem c = constant_problem(Vector::Constant(3, 2.5), 2);
  for (Index m : {1, 7}) {
    const NmcEstimate e = nmc_loss_grad(c, Vector::Zero(2), 5, m, rng);
    CHECK(e.loss == doctest::Approx(std::log(2.5)).epsilon(1e-15));
    CHECK(e.grad.isZero(0.0));
    CHECK(e.g_evals == 2 * 5 * m);
  }

  // Deterministic g with M = 1: loss is the exact average over the sampled indices.
  const FunctionProblem det(
      3, 1, 0, [](const Vector& th, const Vector&) { return Vector{{1.0 + th(0) * th(0), 2.0, 3.0 + th(0)}}; },
      [](const Vector& th, const Vector&) { return Matrix{{2.0 * th(0)}, {0.0}, {1.0}}; });
  const Columns cols{0, 2, 2};
  const Matrix none(0, 1);
  const NmcEstimate e = nmc_loss_grad(det, vec1(0.5), cols, none);
  CHECK(e.loss == doctest::Approx((std::log(1.25) + 2.0 * std::log(3.5)) / 3.0).epsilon(1e-15));
  CHECK(e.grad(0) == doctest::Approx((1.0 / 1.25 + 2.0 / 3.5) / 3.0).epsilon(1e-14));

  // Reciprocal form on g = (2, 4) with the exact outer sum.
  const FunctionProblem two = constant_problem(Vector{{2.0, 4.0}}, 1);
  CHECK(nmc_reciprocal_estimate(two, vec1(0.0), {0, 1}, Matrix::Zero(2, 3)) == doctest::Approx(0.375));
  CHECK_THROWS_AS((void)nmc_loss_grad(det, vec1(0.0), Columns{}, none), ConfigError);
}

TEST_CASE("nmc_loss_grad: gradient of the plug-in loss at fixed samples") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 0.4);
  Matrix a(4, 3), b(4, 3);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) {
      a(i, j) = nd(rng);
      b(i, j) = nd(rng);
    }
  const LognormalProblem problem(a, b, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector theta{{nd(rng), nd(rng), nd(rng)}};
    const Columns cols{static_cast<Index>(trial % 4), 1, 3};
    const Matrix draws = problem.sample_draws(6, rng);
    const NmcEstimate e = nmc_loss_grad(problem, theta, cols, draws);
    const Vector fd = diffcore::central_difference(
        [&](const Vector& t) { return nmc_loss_grad(problem, t, cols, draws).loss; }, theta);
    CHECK(diffcore::max_relative_error(e.grad, fd, 1e-6) < 1e-6);
  }
}

TEST_CASE("nmc: bias shrinks with the inner sample count") {
  const LognormalProblem problem = LognormalProblem::standard(4);
  const Vector theta = Vector::Zero(4);
  const double truth = *problem.exact_loss(theta);
  std::mt19937_64 rng(3);
  std::vector<double> bias;
  for (Index m : {1, 10, 100}) {
    double total = 0.0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) total += nmc_loss_grad(problem, theta, 4, m, rng).loss;
    bias.push_back(std::abs(total / reps - truth));
  }
  CHECK(bias[0] > bias[1]);
  CHECK(bias[1] > bias[2]);
}

TEST_CASE("steppers: closed-form steps") {
  Vector th = vec1(1.0);
  StepperState s(1);
  step_sgd(th, s, vec1(1.0), 0.1);
  CHECK(th(0) == doctest::Approx(0.9).epsilon(1e-15));

  th = vec1(0.0);
  s = StepperState(1);
  step_adam(th, s, vec1(1.0), 0.01, 0.9, 0.999, 1e-8);
  CHECK(th(0) == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));

  // RMSProp with rho = 0.9, grads 1, -2, 0.5.
  th = vec1(0.0);
  s = StepperState(1);
  const double lr = 0.1, eps = 1e-8;
  const double g[3] = {1.0, -2.0, 0.5};
  double v = 0.0, x = 0.0;
  for (double gi : g) {
    step_rmsprop(th, s, vec1(gi), lr, 0.9, eps);
    v = 0.9 * v + 0.1 * gi * gi;
    x -= lr * gi / (std::sqrt(v) + eps);
  }
  CHECK(th(0) == doctest::Approx(x).epsilon(1e-14));
  CHECK(s.t == 3);
  CHECK_THROWS_AS(step_sgd(th, s, vec1(NAN), 0.1), NumericError);
  CHECK_THROWS_AS(step_adam(th, s, vec1(INFINITY), 0.1, 0.9, 0.999, 1e-8), NumericError);
}

TEST_CASE("steppers: monotone descent on a convex quadratic") {
  Matrix h(3, 3);
  h << 3.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.0;
  const Vector opt{{1.0, -1.0, 0.5}};
  auto loss = [&](const Vector& x) { return 0.5 * (x - opt).dot(h * (x - opt)); };
  for (NmcOptimizer kind : {NmcOptimizer::kAdam, NmcOptimizer::kRmsprop, NmcOptimizer::kSgd}) {
    Vector x = Vector::Zero(3);
    StepperState s(3);
    double prev = loss(x);
    bool monotone = true;
    for (int i = 0; i < 300; ++i) {
      const Vector grad = h * (x - opt);
      if (kind == NmcOptimizer::kAdam) step_adam(x, s, grad, 1e-3, 0.9, 0.999, 1e-8);
      if (kind == NmcOptimizer::kRmsprop) step_rmsprop(x, s, grad, 1e-3, 0.9, 1e-8);
      if (kind == NmcOptimizer::kSgd) step_sgd(x, s, grad, 1e-3);
      const double cur = loss(x);
      monotone = monotone && cur < prev;
      prev = cur;
    }
    CHECK_MESSAGE(monotone, to_string(kind));
  }
}

TEST_CASE("run_nmc: reproducible descent and config checks") {
  const LognormalProblem problem = LognormalProblem::standard(3);
  NmcConfig c;
  c.outer = 3;
  c.inner = 10;
  c.iterations = 200;
  c.lr = LearningRate{0.02, 0.0};
  const Vector start = Vector::Constant(3, 1.0);
  const NmcResult a = run_nmc(problem, start, c, 4);
  const NmcResult b = run_nmc(problem, start, c, 4);
  CHECK(a.theta == b.theta);
  CHECK(*problem.exact_loss(a.theta) < *problem.exact_loss(start));
  CHECK(a.trajectory.back().g_evals == 200LL * 2 * 3 * 10);

  CHECK(LearningRate{0.5, 0.5}.at(4) == doctest::Approx(0.25));
  NmcConfig bad = c;
  bad.inner = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lr.eta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS((void)run_nmc(problem, Vector::Zero(2), c, 1), DimensionError);
  CHECK(parse_nmc_optimizer("rmsprop") == NmcOptimizer::kRmsprop);
  CHECK_THROWS_AS((void)parse_nmc_optimizer("lbfgs"), ConfigError);
}
