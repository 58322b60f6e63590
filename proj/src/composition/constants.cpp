#include "civi/composition/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "civi/composition/oracles.hpp"

namespace civi::composition {

void AssumptionConstants::validate() const {
  for (double v : {b_f, m_f, l_f, m_g, l_g, sigma1, sigma2, sigma3}) {
    if (!(v >= 0.0)) {
      throw ConfigError("AssumptionConstants: every constant must be nonnegative");
    }
  }
}

double AssumptionConstants::lipschitz_constant() const { return m_g * m_g * l_f + l_g * m_f; }

AssumptionConstants log_outer_constants(double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) {
    throw ConfigError("log_outer_constants: need 0 < lo <= hi");
  }
  AssumptionConstants c;
  c.m_f = 1.0 / lo;
  c.l_f = 1.0 / (lo * lo);
  c.b_f = std::max(std::abs(std::log(lo)), std::abs(std::log(hi)));
  return c;
}

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) {
    return 0.0;
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

AssumptionConstants estimate_constants(const CompositionalProblem& problem,
                                       const std::vector<Vector>& probes, Index k_draws,
                                       std::mt19937_64& rng) {
  if (probes.size() < 2) {
    throw ConfigError("estimate_constants: at least two probe points are required");
  }
  const Matrix draws = problem.sample_draws(k_draws, rng);
  const Columns cols = problem.all_columns();
  const Index n = problem.pool_size();

  std::vector<Vector> means;
  std::vector<Matrix> jacobians;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double sigma3_sq = 0.0;
  for (const Vector& theta : probes) {
    const OracleGBatch batch(problem, theta, draws);
    const Matrix lv = batch.log_values(cols);
    const Vector gbar = log_mean_rows(lv).array().exp();
    const Matrix jac = batch.mean_jacobian();
    lo = std::min(lo, gbar.minCoeff());
    hi = std::max(hi, gbar.maxCoeff());

    // Outer gradient noise at y = gbar, exact over the pool.
    const Vector mean_grad = gbar.cwiseInverse() / static_cast<double>(n);
    double s1 = 0.0;
    for (Index nu = 0; nu < n; ++nu) {
      Vector d = -mean_grad;
      d(nu) += 1.0 / gbar(nu);
      s1 += d.squaredNorm();
    }
    sigma1_sq = std::max(sigma1_sq, s1 / static_cast<double>(n));

    // Inner value and Jacobian noise per single draw.
    double s2 = 0.0;
    double s3 = 0.0;
    for (Index j = 0; j < draws.cols(); ++j) {
      const Vector gj = lv.col(j).array().exp();
      s3 += (gj - gbar).squaredNorm();
      Matrix jj(n, problem.param_dim());
      for (Index k = 0; k < n; ++k) {
        jj.row(k) = (gj(k) * problem.log_value_gradient(theta, draws.col(j), k)).transpose();
      }
      const double sn = spectral_norm(jj - jac);
      s2 += sn * sn;
    }
    sigma2_sq = std::max(sigma2_sq, s2 / static_cast<double>(draws.cols()));
    sigma3_sq = std::max(sigma3_sq, s3 / static_cast<double>(draws.cols()));
    means.push_back(gbar);
    jacobians.push_back(jac);
  }

  AssumptionConstants c = log_outer_constants(lo, hi);
  c.sigma1 = std::sqrt(sigma1_sq);
  c.sigma2 = std::sqrt(sigma2_sq);
  c.sigma3 = std::sqrt(sigma3_sq);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    c.m_g = std::max(c.m_g, spectral_norm(jacobians[i]));
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      const double dist = (probes[i] - probes[j]).norm();
      if (dist == 0.0) {
        continue;
      }
      c.m_g = std::max(c.m_g, (means[i] - means[j]).norm() / dist);
      c.l_g = std::max(c.l_g, spectral_norm(jacobians[i] - jacobians[j]) / dist);
    }
  }
  return c;
}

}  // namespace civi::composition
