#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "civi/diffcore/gaussian.hpp"
#include "civi/diffcore/gradcheck.hpp"
#include "civi/diffcore/mlp.hpp"
#include "doctest.h"

using namespace civi;
using namespace civi::diffcore;

namespace {

using Builder = std::function<Var(Tape&, Var)>;

Vector analytic(const Builder& f, const Vector& x) {
  Tape tape;
  Var v = tape.variable(x);
  Var out = f(tape, v);
  tape.backward(out);
  return tape.gradient(v).col(0);
}

double evaluate(const Builder& f, const Vector& x) {
  Tape tape;
  return f(tape, tape.constant(x)).scalar();
}

double check(const Builder& f, const Vector& x) {
  const Vector fd = central_difference([&](const Vector& p) { return evaluate(f, p); }, x);
  return max_relative_error(analytic(f, x), fd, 1e-3);
}

Vector randn(std::mt19937_64& rng, Index n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = d(rng);
  }
  return v;
}

Matrix randm(std::mt19937_64& rng, Index r, Index c) {
  Matrix m(r, c);
  m.reshaped() = randn(rng, r * c);
  return m;
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

TEST_CASE("backward of scalar functions") {
  Tape tape;
  Var x = tape.variable(Matrix::Constant(1, 1, 3.0));
  Var y = square(x);
  tape.backward(y);
  CHECK(tape.gradient(x)(0, 0) == doctest::Approx(6.0));

  Tape t2;
  Var a = t2.variable(Matrix::Constant(1, 1, 2.0));
  t2.backward(log(a));
  CHECK(t2.gradient(a)(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("tape usage errors") {
  Tape empty;
  Var detached;
  CHECK_THROWS_AS(empty.backward(detached), UsageError);

  Tape tape;
  Var x = tape.variable(Matrix::Constant(2, 1, 1.0));
  CHECK_THROWS_AS((void)tape.gradient(x), UsageError);
  CHECK_THROWS_AS(tape.backward(x), DimensionError);
  Var s = sum(x);
  tape.backward(s);
  CHECK(tape.gradient(x).isApprox(Matrix::Ones(2, 1)));
  CHECK_THROWS_AS(tape.backward(s), UsageError);
}

TEST_CASE("gradients accumulate over repeated use of one node") {
  Tape tape;
  Var x = tape.variable(Matrix::Constant(1, 1, 1.5));
  Var y = mul(x, add(x, x));  // 2x^2
  tape.backward(y);
  CHECK(tape.gradient(x)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("mlp forward fixtures") {
  MlpSpec spec{3, {5, 4}, 2, Activation::kRelu};
  const Vector zeros = Vector::Zero(spec.param_count());
  CHECK(mlp_forward(spec, zeros, Vector(Vector::Constant(3, 2.5))).isZero());

  MlpSpec one{1, {}, 1, Activation::kRelu};
  // A single linear layer has no activation, so relu is checked one layer deep.
  MlpSpec deep{1, {1}, 1, Activation::kRelu};
  Vector p(4);
  p << 1.0, 0.0, 1.0, 0.0;  // w1, b1, w2, b2
  CHECK(mlp_forward(deep, p, Vector(Vector::Constant(1, -3.0)))(0) == 0.0);
  Vector q(2);
  q << 1.0, 0.0;
  CHECK(mlp_forward(one, q, Vector(Vector::Constant(1, -3.0)))(0) == -3.0);

  std::mt19937_64 rng(7);
  MlpSpec small{2, {4}, 2, Activation::kTanh};
  const Vector params = randn(rng, small.param_count());
  const Vector x = randn(rng, 2);
  // Straight-line re-evaluation with explicit loops.
  double h[4];
  for (int i = 0; i < 4; ++i) {
    double acc = params(8 + i);
    for (int j = 0; j < 2; ++j) {
      acc += params(j * 4 + i) * x(j);
    }
    h[i] = std::tanh(acc);
  }
  Vector expect(2);
  for (int i = 0; i < 2; ++i) {
    double acc = params(12 + 8 + i);
    for (int j = 0; j < 4; ++j) {
      acc += params(12 + j * 2 + i) * h[j];
    }
    expect(i) = acc;
  }
  const Vector got = mlp_forward(small, params, x);
  CHECK((got - expect).norm() < 1e-14);

  Tape tape;
  Var out = mlp_forward(small, tape.constant(params), 0, tape.constant(x));
  CHECK((out.value().col(0) - expect).norm() < 1e-14);
}

TEST_CASE("mlp dimension errors name the layer") {
  MlpSpec spec{3, {4}, 1, Activation::kRelu};
  const Vector params = Vector::Zero(spec.param_count());
  try {
    (void)mlp_forward(spec, params, Vector(Vector::Zero(2)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
  CHECK_THROWS_AS((void)mlp_forward(spec, Vector(Vector::Zero(3)), Vector(Vector::Zero(3))),
                  DimensionError);
}

TEST_CASE("xavier normal init statistics") {
  MlpSpec spec{50, {50}, 50, Activation::kRelu};
  std::mt19937_64 rng(3);
  const Vector p = xavier_normal_init(spec, rng);
  const Vector w = p.head(2500);
  const double var = w.squaredNorm() / 2500.0;
  CHECK(var == doctest::Approx(2.0 / 100.0).epsilon(0.1));
  CHECK(p.segment(2500, 50).isZero());
}

TEST_CASE("mlp scalar loss gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (auto act : {Activation::kRelu, Activation::kTanh}) {
    MlpSpec spec{3, {6, 5}, 2, act};
    const Matrix input = randm(rng, 3, 4);
    const Builder f = [&](Tape& t, Var p) {
      return sum(square(mlp_forward(spec, p, 0, t.constant(input))));
    };
    for (int trial = 0; trial < 100; ++trial) {
      const Vector p = randn(rng, spec.param_count(), 0.7);
      CHECK(check(f, p) < 1e-4);
    }
  }
}

TEST_CASE("elementwise and matrix ops match finite differences") {
  std::mt19937_64 rng(5);
  const Matrix w = randm(rng, 3, 4);
  const Matrix other = randm(rng, 4, 2);
  const std::vector<std::pair<const char*, Builder>> cases = {
      {"exp-log", [](Tape&, Var x) { return sum(log(add_scalar(exp(x), 1.0))); }},
      {"tanh-mul", [](Tape&, Var x) { return sum(mul(tanh(x), square(x))); }},
      {"sub-scale", [](Tape&, Var x) { return sum(square(sub(scale(x, 3.0), exp(x)))); }},
      {"relu", [](Tape&, Var x) { return sum(mul(relu(x), x)); }},
      {"matmul",
       [&](Tape& t, Var x) {
         Var a = slice(x, 0, 3, 4);
         return sum(square(matmul(a, t.constant(other))));
       }},
      {"add_col",
       [&](Tape&, Var x) {
         Var a = slice(x, 0, 3, 2);
         Var b = slice(x, 6, 3, 1);
         return sum(tanh(add_col(a, b)));
       }},
      {"logsumexp",
       [&](Tape&, Var x) { return weighted_sum(rowwise_logsumexp(slice(x, 0, 3, 4)),
                                               Matrix::Constant(3, 1, 0.7)); }},
      {"weighted_sum", [&](Tape&, Var x) { return weighted_sum(square(slice(x, 0, 3, 4)), w); }},
      {"mean", [](Tape&, Var x) { return mean(exp(x)); }},
  };
  for (const auto& [name, f] : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      worst = std::max(worst, check(f, randn(rng, 12)));
    }
    INFO(name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gaussian density ops match finite differences") {
  std::mt19937_64 rng(9);
  for (auto kind : {FactorKind::kDiagonal, FactorKind::kCholesky}) {
    const Index d = 3;
    const Index nf = factor_size(kind, d);
    const Index s = 4;
    const Index k = 5;
    // Layout: Z (d*s), M (d*k), factor.
    const Builder pairwise = [&](Tape&, Var x) {
      Var z = slice(x, 0, d, s);
      Var m = slice(x, d * s, d, k);
      Var l = lower_factor(x, d * (s + k), d, kind);
      return sum(rowwise_logsumexp(pairwise_gauss_logpdf(z, m, l)));
    };
    const Builder paired = [&](Tape&, Var x) {
      Var z = slice(x, 0, d, s);
      Var m = slice(x, d * s, d, s);
      Var l = lower_factor(x, d * (s + k), d, kind);
      return sum(paired_gauss_logpdf(z, m, l));
    };
    const Builder sample = [&](Tape&, Var x) {
      Var flat = slice(x, 0, d + nf, 1);
      Var noise = slice(x, d + nf, d, 1);
      return sum(square(reparam_sample(flat, noise, d, kind)));
    };
    const Builder logpdf = [&](Tape&, Var x) {
      Var flat = slice(x, 0, d + nf, 1);
      Var pt = slice(x, d + nf, d, 1);
      return gaussian_logpdf(pt, flat, d, kind);
    };
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      worst = std::max(worst, check(pairwise, randn(rng, d * (s + k) + nf, 0.5)));
      worst = std::max(worst, check(paired, randn(rng, d * (s + k) + nf, 0.5)));
      worst = std::max(worst, check(sample, randn(rng, d + nf + d, 0.5)));
      worst = std::max(worst, check(logpdf, randn(rng, d + nf + d, 0.5)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("columnwise op propagates user gradients") {
  std::mt19937_64 rng(13);
  const ColumnFn fn = [](const Vector& z) {
    return ValueGrad{std::sin(z(0)) * z(1), Vector{{std::cos(z(0)) * z(1), std::sin(z(0))}}};
  };
  const Builder f = [&](Tape&, Var x) { return sum(columnwise(slice(x, 0, 2, 3), fn)); };
  for (int trial = 0; trial < 100; ++trial) {
    CHECK(check(f, randn(rng, 6)) < 1e-4);
  }
}

TEST_CASE("gaussian_logpdf closed forms") {
  const Index d = 4;
  const auto std_normal = GaussianParams::isotropic(Vector::Zero(d), 1.0);
  CHECK(gaussian_logpdf(Vector::Zero(d), std_normal) ==
        doctest::Approx(-0.5 * d * kLog2Pi).epsilon(1e-14));

  const auto wide = GaussianParams::isotropic(Vector::Zero(1), 2.0);
  CHECK(gaussian_logpdf(Vector::Constant(1, 2.0), wide) ==
        doctest::Approx(-0.5 * std::log(8.0 * std::numbers::pi) - 0.5).epsilon(1e-14));

  // Explicit 2x2 inverse and determinant.
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.5;
  const Vector mu{{0.3, -1.0}};
  const Vector x{{1.1, 0.4}};
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const double dx = x(0) - mu(0);
  const double dy = x(1) - mu(1);
  const double quad = (cov(1, 1) * dx * dx - 2.0 * cov(0, 1) * dx * dy + cov(0, 0) * dy * dy) / det;
  const double expect = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
  CHECK(gaussian_logpdf(x, GaussianParams::from_covariance(mu, cov)) ==
        doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("gaussian_logpdf errors") {
  const auto g = GaussianParams::isotropic(Vector::Zero(2), 1.0);
  CHECK_THROWS_AS((void)gaussian_logpdf(Vector::Zero(3), g), DimensionError);
  CHECK_THROWS_AS((void)gaussian_logpdf(Vector::Constant(2, std::nan("")), g), NumericError);
  GaussianParams bad = g;
  bad.factor(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)gaussian_logpdf(Vector::Zero(2), bad), NumericError);
}

TEST_CASE("diagonal gaussian integrates to one on a grid") {
  GaussianParams g{Vector{{0.5, -0.3}}, FactorKind::kDiagonal,
                   Vector{{std::log(0.8), std::log(1.3)}}};
  const int n = 400;
  const double lo = -8.0;
  const double h = 16.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector x{{lo + (i + 0.5) * h, lo + (j + 0.5) * h}};
      total += std::exp(gaussian_logpdf(x, g)) * h * h;
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("reparam_sample fixtures") {
  Matrix cov(3, 3);
  cov << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 0.7;
  const Vector mu{{1.0, -2.0, 0.5}};
  const auto g = GaussianParams::from_covariance(mu, cov);
  CHECK(reparam_sample(g, Vector::Zero(3)).isApprox(mu));
  const auto unit = GaussianParams::isotropic(mu, 1.0);
  const Vector u{{0.2, -0.1, 0.4}};
  CHECK((reparam_sample(unit, u) - (mu + u)).norm() < 1e-15);

  // Change of variables: log q(mean + L u) = log N(u; 0, I) - log|det L|.
  const Matrix l = g.lower();
  const double expect = gaussian_logpdf(u, GaussianParams::isotropic(Vector::Zero(3), 1.0)) -
                        l.diagonal().array().log().sum();
  CHECK(gaussian_logpdf(reparam_sample(g, u), g) == doctest::Approx(expect).epsilon(1e-13));

  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  const int draws = 100000;
  Matrix second = Matrix::Zero(3, 3);
  Vector first = Vector::Zero(3);
  for (int i = 0; i < draws; ++i) {
    const Vector noise{{nd(rng), nd(rng), nd(rng)}};
    const Vector x = reparam_sample(g, noise);
    first += x;
    second += x * x.transpose();
  }
  first /= draws;
  const Matrix sample_cov = second / draws - first * first.transpose();
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      // 5% of the entry, with an absolute floor for the small off-diagonals.
      CHECK(std::abs(sample_cov(i, j) - cov(i, j)) < std::max(0.05 * std::abs(cov(i, j)), 0.02));
    }
  }
}

TEST_CASE("evaluation is bit-identical across repeats") {
  std::mt19937_64 rng(1);
  MlpSpec spec{3, {8}, 2, Activation::kTanh};
  const Vector p = randn(rng, spec.param_count());
  const Matrix x = randm(rng, 3, 10);
  const Matrix a = mlp_forward(spec, p, x);
  const Matrix b = mlp_forward(spec, p, x);
  CHECK((a.array() == b.array()).all());
  const Builder f = [&](Tape& t, Var q) { return sum(mlp_forward(spec, q, 0, t.constant(x))); };
  const Vector g1 = analytic(f, p);
  const Vector g2 = analytic(f, p);
  CHECK((g1.array() == g2.array()).all());
}
