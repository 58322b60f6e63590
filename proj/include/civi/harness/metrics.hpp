#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "civi/sivi/model.hpp"
#include "civi/sivi/target.hpp"
#include "civi/solver/solver.hpp"

namespace civi::harness {

/// Product-Gaussian kernel density estimate with Scott's-rule bandwidths
/// h_i = sd_i * m^(-1 / (d + 4)).
class Kde {
 public:
  /// One sample per column; needs at least two samples.
  explicit Kde(Matrix samples);

  [[nodiscard]] double log_density(const Vector& z) const;
  [[nodiscard]] Vector log_density(const Matrix& points) const;
  [[nodiscard]] const Vector& bandwidth() const { return h_; }

 private:
  Matrix scaled_;  // samples divided by the bandwidths
  Vector h_;
  double log_norm_ = 0.0;
};

struct KlEstimate {
  double kl = 0.0;
  /// Monte-Carlo standard error over the evaluation samples.
  double std_error = 0.0;
};

/// KL(q || p) ~ mean over fresh draws z ~ q of log q_kde(z) - log p(z), with
/// the kernel estimate fitted on a separate set of `fit` draws.
KlEstimate kl_estimate(const sivi::SemiImplicitModel& model, const ParamVector& theta,
                       const sivi::TargetDensity& target, Index fit, Index eval, std::uint64_t seed);

/// Two-means clustering by Lloyd iterations, started from the samples with
/// the smallest and largest first coordinate. Centres are returned as
/// columns sorted by first coordinate.
Matrix kmeans2(const Matrix& samples, int max_iter = 100);

/// Plug-in negative ELBO: mean over a fresh pool of `outer` entries of
/// log mean_k q(h_j | eps_k) - log p(h_j) with `inner` mixing draws.
double negative_elbo(const sivi::SemiImplicitModel& model, const ParamVector& theta,
                     const sivi::TargetDensity& target, Index outer, Index inner, std::uint64_t seed);

/// Row-major grid of `size` x `size` points over [xmin, xmax] x [ymin, ymax];
/// x varies slowest. Writes the header "x,y,logdensity".
void write_grid(const std::filesystem::path& path, const std::array<double, 4>& extent, Index size,
                const std::function<double(const Vector&)>& log_density);

/// One sample per row, columns z1..zd, %.17g.
void write_samples(const std::filesystem::path& path, const Matrix& samples);

/// Columns t,loss,grad_norm,alpha,wall_ms and bias when any record has one.
void write_trajectory(const std::filesystem::path& path,
                      const std::vector<solver::IterationRecord>& records);

struct SampleSummary {
  Vector mean;
  Vector std;
};
SampleSummary summarize(const Matrix& samples);

/// Least squares y = intercept + slope x with a two-sided 95% Student-t
/// interval on the slope.
struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace civi::harness
