#pragma once

#include "civi/composition/problem.hpp"

namespace civi::solver {

/// m = g1 m + (1 - g1) grad; v = g2 v + (1 - g2) grad^2;
/// theta -= alpha m / (sqrt(v) + xi). Coefficients are per coordinate.
/// Throws NumericError naming `t` when grad is not finite.
void primary_update(Vector& theta, Vector& m, Vector& v, const Vector& grad, const Vector& alpha,
                    const Vector& gamma1, const Vector& gamma2, double xi, Index t);

/// z = (1 - 1/beta) theta + (1/beta) theta_next, so theta_next = (1 - beta) theta + beta z.
Vector extrapolate(const Vector& theta, const Vector& theta_next, double beta);

/// Order of the series used for log1p(r) when r = exp(-gap) is small.
inline constexpr int kTaylorOrder = 8;
/// Gaps (in nats) above which the series replaces log1p. At this gap
/// the truncation error r^9 / 9 is below 1e-20.
inline constexpr double kTaylorGap = 5.0;

/// log(exp(a) + exp(b)) via the max shift. For gaps above kTaylorGap the
/// correction log1p(exp(min - max)) is summed as a truncated series.
double log_add(double a, double b);

/// log1p(r) by its alternating series to kTaylorOrder terms; r in [0, 1).
double log1p_series(double r);

/// log y <- log((1 - beta) y + beta gbar) on `chunk` only. `log_gbar` is
/// aligned with `chunk`. beta must lie in (0, 1]; beta = 1 copies gbar.
void smooth_update_log(Vector& log_y, const Vector& log_gbar, double beta,
                       const composition::Columns& chunk);

}  // namespace civi::solver
