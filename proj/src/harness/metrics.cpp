#include "civi/harness/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "civi/composition/rng.hpp"
#include "civi/sivi/pool.hpp"
#include "civi/sivi/problem.hpp"

namespace civi::harness {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

Kde::Kde(Matrix samples) {
  const Index d = samples.rows();
  const Index m = samples.cols();
  if (d < 1 || m < 2) throw ConfigError("Kde: need at least two samples");
  const Vector mean = samples.rowwise().mean();
  const Vector sd =
      ((samples.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(m - 1)).sqrt();
  const double factor = std::pow(static_cast<double>(m), -1.0 / (static_cast<double>(d) + 4.0));
  h_ = sd * factor;
  if (!(h_.minCoeff() > 0.0)) throw NumericError("Kde: degenerate sample spread");
  scaled_ = h_.cwiseInverse().asDiagonal() * samples;
  log_norm_ = -std::log(static_cast<double>(m)) - h_.array().log().sum() -
              0.5 * static_cast<double>(d) * kLog2Pi;
}

double Kde::log_density(const Vector& z) const {
  const Vector zs = z.cwiseQuotient(h_);
  const Vector q = -0.5 * (scaled_.colwise() - zs).colwise().squaredNorm().transpose();
  const double hi = q.maxCoeff();
  return hi + std::log((q.array() - hi).exp().sum()) + log_norm_;
}

Vector Kde::log_density(const Matrix& points) const {
  Vector out(points.cols());
  for (Index j = 0; j < points.cols(); ++j) out(j) = log_density(Vector(points.col(j)));
  return out;
}

KlEstimate kl_estimate(const sivi::SemiImplicitModel& model, const ParamVector& theta,
                       const sivi::TargetDensity& target, Index fit, Index eval, std::uint64_t seed) {
  if (eval < 2) throw ConfigError("kl_estimate: need at least two evaluation samples");
  auto rng_fit = composition::make_stream(seed, 0, composition::Stream::kEvaluation);
  auto rng_eval = composition::make_stream(seed, 1, composition::Stream::kEvaluation);
  const Kde kde(model.sample(theta, fit, rng_fit));
  const Matrix z = model.sample(theta, eval, rng_eval);
  Vector diff(eval);
  for (Index j = 0; j < eval; ++j) {
    const Vector zj = z.col(j);
    diff(j) = kde.log_density(zj) - target(zj);
  }
  const double mean = diff.mean();
  const double var = (diff.array() - mean).square().sum() / static_cast<double>(eval - 1);
  return {mean, std::sqrt(var / static_cast<double>(eval))};
}

Matrix kmeans2(const Matrix& samples, int max_iter) {
  const Index m = samples.cols();
  if (m < 2) throw ConfigError("kmeans2: need at least two samples");
  Index lo = 0;
  Index hi = 0;
  for (Index j = 1; j < m; ++j) {
    if (samples(0, j) < samples(0, lo)) lo = j;
    if (samples(0, j) > samples(0, hi)) hi = j;
  }
  Matrix c(samples.rows(), 2);
  c.col(0) = samples.col(lo);
  c.col(1) = samples.col(hi);
  std::vector<int> label(static_cast<std::size_t>(m), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index j = 0; j < m; ++j) {
      const int l = (samples.col(j) - c.col(0)).squaredNorm() <= (samples.col(j) - c.col(1)).squaredNorm() ? 0 : 1;
      if (label[static_cast<std::size_t>(j)] != l) {
        label[static_cast<std::size_t>(j)] = l;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sum = Matrix::Zero(samples.rows(), 2);
    Index count[2] = {0, 0};
    for (Index j = 0; j < m; ++j) {
      const int l = label[static_cast<std::size_t>(j)];
      sum.col(l) += samples.col(j);
      ++count[l];
    }
    for (int l = 0; l < 2; ++l) {
      if (count[l] > 0) c.col(l) = sum.col(l) / static_cast<double>(count[l]);
    }
  }
  if (c(0, 0) > c(0, 1)) c.col(0).swap(c.col(1));
  return c;
}

double negative_elbo(const sivi::SemiImplicitModel& model, const ParamVector& theta,
                     const sivi::TargetDensity& target, Index outer, Index inner, std::uint64_t seed) {
  if (inner < 1) throw ConfigError("negative_elbo: need at least one inner draw");
  const sivi::SiviProblem problem(model, sivi::build_pool(model, outer, seed), target);
  auto rng = composition::make_stream(seed, 0, composition::Stream::kEvaluation);
  const Matrix draws = problem.sample_draws(inner, rng);
  const Index block = 256;
  double total = 0.0;
  for (Index start = 0; start < outer; start += block) {
    composition::Columns cols;
    for (Index j = start; j < std::min(outer, start + block); ++j) cols.push_back(j);
    total += composition::log_mean_rows(problem.log_values(theta, draws, cols)).sum();
  }
  return total / static_cast<double>(outer);
}

void write_grid(const std::filesystem::path& path, const std::array<double, 4>& extent, Index size,
                const std::function<double(const Vector&)>& log_density) {
  if (size < 2) throw ConfigError("write_grid: need at least 2 points per axis");
  std::ofstream out = open_out(path);
  out << "x,y,logdensity\n";
  const double dx = (extent[1] - extent[0]) / static_cast<double>(size - 1);
  const double dy = (extent[3] - extent[2]) / static_cast<double>(size - 1);
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) {
      const Vector z{{extent[0] + dx * static_cast<double>(i), extent[2] + dy * static_cast<double>(j)}};
      out << fmt17(z(0)) << ',' << fmt17(z(1)) << ',' << fmt17(log_density(z)) << '\n';
    }
  }
}

void write_samples(const std::filesystem::path& path, const Matrix& samples) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < samples.rows(); ++i) out << (i ? ",z" : "z") << i + 1;
  out << '\n';
  for (Index j = 0; j < samples.cols(); ++j) {
    for (Index i = 0; i < samples.rows(); ++i) out << (i ? "," : "") << fmt17(samples(i, j));
    out << '\n';
  }
}

void write_trajectory(const std::filesystem::path& path,
                      const std::vector<solver::IterationRecord>& records) {
  const bool with_bias = std::any_of(records.begin(), records.end(),
                                     [](const solver::IterationRecord& r) { return r.bias.has_value(); });
  std::ofstream out = open_out(path);
  out << "t,loss,grad_norm,alpha,wall_ms" << (with_bias ? ",bias" : "") << '\n';
  for (const solver::IterationRecord& r : records) {
    out << r.t << ',' << fmt17(r.loss) << ',' << fmt17(r.grad_norm) << ',' << fmt17(r.alpha) << ','
        << fmt17(r.wall_ms);
    if (with_bias) out << ',' << (r.bias ? fmt17(*r.bias) : std::string("nan"));
    out << '\n';
  }
}

SampleSummary summarize(const Matrix& samples) {
  const Index m = samples.cols();
  if (m < 2) throw ConfigError("summarize: need at least two samples");
  const Vector mean = samples.rowwise().mean();
  const Vector var =
      (samples.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(m - 1);
  return {mean, var.array().sqrt()};
}

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) throw ConfigError("ols_fit: need at least three matching points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("ols_fit: x values are all equal");
  OlsFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  const double dof = static_cast<double>(n - 2);
  f.slope_std_error = std::sqrt(sse / dof / sxx);
  const double q = boost::math::quantile(boost::math::students_t(dof), 0.975);
  f.ci_low = f.slope - q * f.slope_std_error;
  f.ci_high = f.slope + q * f.slope_std_error;
  return f;
}

}  // namespace civi::harness
