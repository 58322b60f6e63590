#include "civi/solver/updates.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace civi::solver {

void primary_update(Vector& theta, Vector& m, Vector& v, const Vector& grad, const Vector& alpha,
                    const Vector& gamma1, const Vector& gamma2, double xi, Index t) {
  const Index p = theta.size();
  if (m.size() != p || v.size() != p || grad.size() != p || alpha.size() != p ||
      gamma1.size() != p || gamma2.size() != p) {
    throw DimensionError("primary_update: length mismatch at iteration " + std::to_string(t));
  }
  for (Index i = 0; i < p; ++i) {
    if (!std::isfinite(grad(i))) {
      throw NumericError("primary_update: non-finite gradient entry " + std::to_string(i) +
                         " at iteration " + std::to_string(t));
    }
  }
  m.array() = gamma1.array() * m.array() + (1.0 - gamma1.array()) * grad.array();
  v.array() = gamma2.array() * v.array() + (1.0 - gamma2.array()) * grad.array().square();
  theta.array() -= alpha.array() * m.array() / (v.array().sqrt() + xi);
}

Vector extrapolate(const Vector& theta, const Vector& theta_next, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw ConfigError("extrapolate: beta must lie in (0, 1]");
  }
  if (theta.size() != theta_next.size()) {
    throw DimensionError("extrapolate: length mismatch");
  }
  if (beta == 1.0) return theta_next;
  return (1.0 - 1.0 / beta) * theta + (1.0 / beta) * theta_next;
}

double log1p_series(double r) {
  // Horner form of r - r^2/2 + r^3/3 - ... +- r^N/N.
  double acc = 0.0;
  for (int k = kTaylorOrder; k >= 1; --k) {
    const double coeff = (k % 2 == 1 ? 1.0 : -1.0) / k;
    acc = coeff + r * acc;
  }
  return r * acc;
}

double log_add(double a, double b) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double gap = hi - std::min(a, b);
  if (gap > kTaylorGap) {
    return hi + log1p_series(std::exp(-gap));
  }
  return hi + std::log1p(std::exp(-gap));
}

void smooth_update_log(Vector& log_y, const Vector& log_gbar, double beta,
                       const composition::Columns& chunk) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw ConfigError("smooth_update_log: beta must lie in (0, 1]");
  }
  if (static_cast<Index>(chunk.size()) != log_gbar.size()) {
    throw DimensionError("smooth_update_log: chunk and log_gbar lengths differ");
  }
  const double log_keep = std::log1p(-beta);
  const double log_beta = std::log(beta);
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    const Index k = chunk[i];
    if (k < 0 || k >= log_y.size()) {
      throw DimensionError("smooth_update_log: index " + std::to_string(k) + " outside log_y");
    }
    const double fresh = log_beta + log_gbar(static_cast<Index>(i));
    log_y(k) = beta == 1.0 ? fresh : log_add(log_keep + log_y(k), fresh);
  }
}

}  // namespace civi::solver
