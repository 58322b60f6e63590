#include "civi/solver/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace civi::solver {

namespace {

Index batch(double c, double t, BatchGrowth growth) {
  const double k = growth == BatchGrowth::kTheorem ? c * std::pow(t, 0.8) : c;
  // pow() can land one ulp above an exact integer (32^0.8 = 16).
  const double r = std::round(k);
  if (std::abs(k - r) <= 1e-12 * std::max(1.0, k)) return static_cast<Index>(r);
  return static_cast<Index>(std::ceil(k));
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("schedule: ") + name + " must be positive and finite");
  }
}

void check_group(const ScheduleConfig& c, double c_alpha, double c_gamma, const std::string& where) {
  check_positive(c_alpha, "C_alpha");
  check_positive(c_gamma, "C_gamma");
  if (c_gamma > 1.0) {
    throw ConfigError("schedule: C_gamma must be at most 1" + where);
  }
  for (Index t = 1; t <= c.iterations; ++t) {
    const double g2 = schedule(t, c, c_alpha, c_gamma).gamma2;
    if (!(g2 > 0.0 && g2 < 1.0)) {
      throw ConfigError("schedule: gamma2 = " + std::to_string(g2) + " at t = " + std::to_string(t) +
                        " is outside (0, 1)" + where);
    }
  }
}

}  // namespace

BatchGrowth parse_batch_growth(const std::string& name) {
  if (name == "theorem") return BatchGrowth::kTheorem;
  if (name == "constant") return BatchGrowth::kConstant;
  throw ConfigError("unknown batch growth '" + name + "' (expected theorem or constant)");
}

std::string to_string(BatchGrowth growth) {
  return growth == BatchGrowth::kTheorem ? "theorem" : "constant";
}

ScheduleValues schedule(Index t, const ScheduleConfig& config, double c_alpha, double c_gamma) {
  if (t < 1) {
    throw UsageError("schedule: t must be at least 1");
  }
  const auto tt = static_cast<double>(t);
  ScheduleValues s;
  s.alpha = config.frozen ? 0.0 : c_alpha / std::pow(tt, 0.2);
  s.beta = config.c_beta;
  s.gamma1 = c_gamma * std::pow(config.mu, tt);
  const double gap = 1.0 - s.gamma1;
  s.gamma2 = 1.0 - (c_alpha / std::pow(tt, 0.4)) * gap * gap;
  s.k1 = batch(config.c1, tt, config.batch_growth);
  s.k2 = batch(config.c2, tt, config.batch_growth);
  s.k3 = batch(config.c3, tt, config.batch_growth);
  return s;
}

ScheduleValues schedule(Index t, const ScheduleConfig& config) {
  return schedule(t, config, config.c_alpha, config.c_gamma);
}

CoordinateSchedule coordinate_schedule(Index t, const ScheduleConfig& config, Index p) {
  const ScheduleValues base = schedule(t, config);
  CoordinateSchedule out{Vector::Constant(p, base.alpha), Vector::Constant(p, base.gamma1),
                         Vector::Constant(p, base.gamma2)};
  for (const GroupOverride& g : config.groups) {
    const ScheduleValues s = schedule(t, config, g.c_alpha.value_or(config.c_alpha),
                                      g.c_gamma.value_or(config.c_gamma));
    const Index len = g.end - g.begin;
    out.alpha.segment(g.begin, len).setConstant(s.alpha);
    out.gamma1.segment(g.begin, len).setConstant(s.gamma1);
    out.gamma2.segment(g.begin, len).setConstant(s.gamma2);
  }
  return out;
}

Index ScheduleConfig::effective_rotation_period() const {
  if (rotation_period > 0) return rotation_period;
  if (chunks <= 1) return 0;
  return (iterations + 4 * chunks - 1) / (4 * chunks);
}

void ScheduleConfig::validate(Index n, Index p) const {
  check_positive(c_beta, "C_beta");
  if (!(c_beta < 1.0)) {
    throw ConfigError("schedule: C_beta must be below 1");
  }
  check_positive(c1, "C1");
  check_positive(c2, "C2");
  check_positive(c3, "C3");
  if (!(mu > 0.0 && mu < 1.0)) {
    throw ConfigError("schedule: mu must lie in (0, 1)");
  }
  check_positive(xi, "xi");
  if (iterations < 1) {
    throw ConfigError("schedule: iteration budget must be at least 1");
  }
  if (d_t < 0 || d_t > n) {
    throw ConfigError("schedule: d_t = " + std::to_string(d_t) + " outside [1, " + std::to_string(n) +
                      "] (0 selects n)");
  }
  if (chunks < 1 || chunks > n) {
    throw ConfigError("schedule: chunk count must lie in [1, n]");
  }
  if (rotation_period < 0) {
    throw ConfigError("schedule: rotation period must be nonnegative");
  }
  check_group(*this, c_alpha, c_gamma, "");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const GroupOverride& g = groups[i];
    const std::string where = " (group " + std::to_string(i) + ")";
    if (g.begin < 0 || g.end > p || g.begin >= g.end) {
      throw ConfigError("schedule: group " + std::to_string(i) + " range [" + std::to_string(g.begin) +
                        ", " + std::to_string(g.end) + ") is not inside [0, " + std::to_string(p) + ")");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (g.begin < groups[j].end && groups[j].begin < g.end) {
        throw ConfigError("schedule: groups " + std::to_string(j) + " and " + std::to_string(i) +
                          " overlap");
      }
    }
    check_group(*this, g.c_alpha.value_or(c_alpha), g.c_gamma.value_or(c_gamma), where);
  }
}

}  // namespace civi::solver
