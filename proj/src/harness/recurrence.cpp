#include "civi/harness/recurrence.hpp"

#include <algorithm>
#include <cmath>

namespace civi::harness {

RecurrenceReport run_recurrence(const RecurrenceCase& rc) {
  rc.validate();
  const double gap = rc.b - rc.a;
  const double t0_real = std::pow(rc.c1 * rc.c_eta * rc.c_eta, 1.0 / rc.a) + 1.0;
  if (t0_real > 1e8) {
    throw ConfigError("recurrence: (c1 c_eta^2)^(1/a) exceeds 1e8 steps");
  }
  RecurrenceReport rep;
  rep.t0 = static_cast<Index>(std::floor(t0_real));
  const Index last = std::max(rc.horizon, rep.t0);

  std::vector<double> scaled(static_cast<std::size_t>(last));
  double a_t = rc.a1;
  double head = 0.0;
  for (Index t = 1; t <= last; ++t) {
    const double tt = static_cast<double>(t);
    const double s = a_t * std::pow(tt, gap);
    scaled[static_cast<std::size_t>(t - 1)] = s;
    if (a_t < 0.0) rep.went_negative = true;
    if (t <= rep.t0) head = std::max(head, std::abs(s));
    const double eta = rc.c_eta / std::pow(tt, rc.a);
    const double zeta = rc.c_zeta / std::pow(tt, rc.b);
    a_t = (1.0 - eta + rc.c1 * eta * eta) * a_t + rc.c2 * zeta;
  }
  rep.c_a = head + rc.c2 * rc.c_zeta / (rc.c_eta - 1.0 - gap);

  rep.max_scaled = scaled[0];
  rep.argmax_t = 1;
  for (Index t = 1; t <= rc.horizon; ++t) {
    const double s = scaled[static_cast<std::size_t>(t - 1)];
    if (s > rep.max_scaled) {
      rep.max_scaled = s;
      rep.argmax_t = t;
    }
  }
  rep.final_value = scaled[static_cast<std::size_t>(rc.horizon - 1)] / std::pow(static_cast<double>(rc.horizon), gap);
  rep.holds = rep.max_scaled <= rep.c_a;
  return rep;
}

}  // namespace civi::harness
