#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "civi/composition/fixtures.hpp"
#include "civi/composition/oracles.hpp"
#include "civi/diffcore/gradcheck.hpp"
#include "civi/sketch/sketch.hpp"
#include "doctest.h"

using namespace civi;
using namespace civi::composition;
using namespace civi::sketch;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

LognormalProblem random_lognormal(Index n, Index p, std::mt19937_64& rng) {
  return LognormalProblem(random_matrix(n, p, rng, 0.7), random_matrix(n, p, rng, 0.3), 0.6);
}

Vector random_log_y(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.5);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

/// grad gbar^T grad f with both factors formed densely.
Vector full_product(const OracleFBatch& f, const OracleGBatch& g) {
  const Index n = g.problem().pool_size();
  return g.mean_jacobian().transpose() * f.mean_gradient(n);
}

void for_each_subset(Index n, Index d, const std::function<void(const Columns&)>& fn) {
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  std::fill(mask.begin(), mask.begin() + d, true);
  do {
    Columns s;
    for (Index i = 0; i < n; ++i)
      if (mask[static_cast<std::size_t>(i)]) s.push_back(i);
    fn(s);
  } while (std::prev_permutation(mask.begin(), mask.end()));
}

}  // namespace

TEST_CASE("sketch: full subset reproduces the exact product") {
  std::mt19937_64 rng(1);
  const LognormalProblem problem = random_lognormal(6, 4, rng);
  const Vector theta = random_matrix(4, 1, rng, 0.5).col(0);
  const Vector log_y = random_log_y(6, rng);
  const OracleFBatch f = oracle_f(log_y, 20, rng);
  const OracleGBatch g = oracle_g(problem, theta, 30, rng);
  const Vector exact = full_product(f, g);
  const Vector sk = sketch_gradient(f, g, log_y, SketchPlan{6, SketchMode::kUniform}, rng);
  CHECK(diffcore::max_relative_error(sk, exact, 1e-12) < 1e-12);
}

TEST_CASE("sketch: exhaustive subset average is unbiased") {
  std::mt19937_64 rng(2);
  for (Index n : {2, 4, 5, 6}) {
    const LognormalProblem problem = random_lognormal(n, 3, rng);
    const Vector theta = random_matrix(3, 1, rng, 0.5).col(0);
    const Vector log_y = random_log_y(n, rng);
    const OracleFBatch f = oracle_f(log_y, 3 * n, rng);
    const OracleGBatch g = oracle_g(problem, theta, 15, rng);
    const Vector exact = full_product(f, g);
    for (Index d = 1; d <= n; ++d) {
      Vector total = Vector::Zero(3);
      int subsets = 0;
      for_each_subset(n, d, [&](const Columns& s) {
        total += sketch_gradient_subset(f, g, log_y, s, static_cast<double>(n) / static_cast<double>(d));
        ++subsets;
      });
      CHECK(diffcore::max_relative_error(total / subsets, exact, 1e-12) < 1e-12);
    }
  }
}

TEST_CASE("sketch: subsets missing the sampled support give zero") {
  std::mt19937_64 rng(3);
  const LognormalProblem problem = random_lognormal(5, 2, rng);
  const Vector log_y = random_log_y(5, rng);
  const OracleFBatch f = OracleFBatch::from_indices({0, 0, 1}, log_y);
  const OracleGBatch g = oracle_g(problem, Vector::Zero(2), 10, rng);
  CHECK(sketch_gradient_subset(f, g, log_y, {2, 3, 4}, 5.0 / 3.0).isZero(0.0));
  CHECK_THROWS_AS((void)sketch_gradient_subset(f, g, log_y, {}, 1.0), ConfigError);
  CHECK_THROWS_AS((void)sketch_gradient_subset(f, g, log_y, {9}, 1.0), DimensionError);
  CHECK_THROWS_AS(SketchPlan{0}.validate(5), ConfigError);
  CHECK_THROWS_AS(SketchPlan{6}.validate(5), ConfigError);
  CHECK_THROWS_AS((void)parse_sketch_mode("gauss"), ConfigError);
  CHECK(parse_sketch_mode(to_string(SketchMode::kSparse)) == SketchMode::kSparse);
}

TEST_CASE("log_scale_combine: fixtures and linear-domain agreement") {
  // gbar = y and one hit per index: every weight is 1/K1.
  const Vector log_y{{0.3, -1.2, 2.5, 0.0}};
  const Columns idx{0, 2, 3};
  const Vector log_gbar{{0.3, 2.5, 0.0}};
  const SparseOuterGrad k = log_scale_combine(idx, {1, 1, 1}, log_gbar, log_y, 3, 4);
  for (Index i = 0; i < 3; ++i) CHECK(k.weights()(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(k.dense()(1) == 0.0);

  // Single sample with gbar = 2 y.
  const SparseOuterGrad two = log_scale_combine(Columns{1}, {1}, Vector::Constant(1, -1.2 + std::log(2.0)),
                                                log_y, 1, 4);
  CHECK(two.weights()(0) == doctest::Approx(2.0).epsilon(1e-15));

  // Zero counts are dropped.
  CHECK(log_scale_combine(Columns{0, 1}, {0, 2}, Vector::Zero(2), log_y, 2, 4).support_size() == 1);

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> hits(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 8;
    const Vector ly = random_log_y(n, rng) * 20.0;
    Columns index{1, 4, 6, 7};
    std::vector<Index> count;
    Index k1 = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
      count.push_back(hits(rng));
      k1 += count.back();
    }
    const Vector lg = random_log_y(4, rng) * 20.0;
    const SparseOuterGrad out = log_scale_combine(index, count, lg, ly, k1, n);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const double linear = static_cast<double>(count[i]) * std::exp(lg(static_cast<Index>(i))) /
                            (static_cast<double>(k1) * std::exp(ly(index[i])));
      CHECK(std::abs(out.weights()(static_cast<Index>(i)) - linear) <= 1e-10 * std::abs(linear));
    }
  }
}

TEST_CASE("sparse sketch: degenerate supports") {
  std::mt19937_64 rng(5);
  const LognormalProblem problem = random_lognormal(6, 3, rng);
  const Vector theta = random_matrix(3, 1, rng, 0.5).col(0);
  const Vector log_y = random_log_y(6, rng);
  const OracleGBatch g = oracle_g(problem, theta, 25, rng);

  // Every sample hits index 4: weight K1 * gbar / (K1 y) = gbar / y.
  const Index k1 = 7;
  const OracleFBatch f = OracleFBatch::from_indices(std::vector<Index>(k1, 4), log_y);
  const SparseOuterGrad k = log_scale_combine(f, g.log_mean({4}), log_y, 6);
  REQUIRE(k.support_size() == 1);
  CHECK(k.count[0] == k1);
  const Vector expected = g.jacobian_column(4) / std::exp(log_y(4));
  for (int rep = 0; rep < 3; ++rep) {
    const Vector out = sketch_gradient_sparse(k, g, SketchPlan{3, SketchMode::kSparse}, rng);
    CHECK(diffcore::max_relative_error(out, expected, 1e-12) < 1e-12);
  }

  SparseOuterGrad empty;
  empty.n = 6;
  CHECK(sketch_gradient_sparse(empty, g, SketchPlan{2, SketchMode::kSparse}, rng).isZero(0.0));
}

TEST_CASE("sparse sketch: Monte-Carlo mean matches the full product") {
  std::mt19937_64 rng(6);
  const LognormalProblem problem = random_lognormal(6, 3, rng);
  const Vector theta = random_matrix(3, 1, rng, 0.5).col(0);
  const Vector log_y = random_log_y(6, rng);
  const OracleFBatch f = OracleFBatch::from_indices({0, 1, 1, 3, 4, 5, 5, 5}, log_y);
  const OracleGBatch g = oracle_g(problem, theta, 20, rng);
  const Vector exact = full_product(f, g);
  const SparseOuterGrad k = log_scale_combine(f, g.log_mean({0, 1, 3, 4, 5}), log_y, 6);
  const SketchPlan plan{2, SketchMode::kSparse};
  const int reps = 100000;
  Vector sparse_mean = Vector::Zero(3);
  Vector uniform_mean = Vector::Zero(3);
  for (int r = 0; r < reps; ++r) {
    sparse_mean += sketch_gradient_sparse(k, g, plan, rng);
    uniform_mean += sketch_gradient(f, g, log_y, SketchPlan{2, SketchMode::kUniform}, rng);
  }
  sparse_mean /= reps;
  uniform_mean /= reps;
  CHECK((sparse_mean - exact).norm() < 0.01 * exact.norm());
  CHECK((uniform_mean - exact).norm() < 0.01 * exact.norm());
  // Through the dispatching entry point too.
  std::mt19937_64 r1(9);
  std::mt19937_64 r2(9);
  CHECK(sketch_gradient(f, g, log_y, plan, r1) == sketch_gradient_sparse(k, g, plan, r2));
}

TEST_CASE("sketch: Jacobian column touches stay within d * K") {
  std::mt19937_64 rng(7);
  const LognormalProblem inner = random_lognormal(40, 3, rng);
  const CountingProblem problem(inner);
  const Vector log_y = random_log_y(40, rng);
  for (Index d : {1, 5, 17, 40}) {
    for (SketchMode mode : {SketchMode::kUniform, SketchMode::kSparse}) {
      const OracleFBatch f = oracle_f(log_y, 30, rng);
      const OracleGBatch g = oracle_g(problem, Vector::Zero(3), 12, rng);
      const_cast<CountingProblem&>(problem).reset();
      (void)sketch_gradient(f, g, log_y, SketchPlan{d, mode}, rng);
      CHECK(problem.touches() <= d * 12);
    }
  }
}

TEST_CASE("sample_without_replacement: distinct and uniform") {
  std::mt19937_64 rng(8);
  const Columns pool{0, 1, 2, 3, 4};
  std::vector<int> hits(5, 0);
  for (int r = 0; r < 20000; ++r) {
    const Columns s = sample_without_replacement(pool, 2, rng);
    CHECK(std::set<Index>(s.begin(), s.end()).size() == 2);
    for (Index i : s) ++hits[static_cast<std::size_t>(i)];
  }
  // Each index appears with probability 2/5; 3 sigma of a binomial(20000, 0.4).
  for (int h : hits) CHECK(std::abs(h - 8000) < 3.0 * std::sqrt(20000 * 0.4 * 0.6));
  CHECK_THROWS_AS((void)sample_without_replacement(pool, 6, rng), ConfigError);
}
