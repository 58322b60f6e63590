#pragma once

#include "civi/harness/config.hpp"

namespace civi::harness {

struct RecurrenceReport {
  /// max over t <= t0 of |A_t| t^(b-a), plus c2 c_zeta / (c_eta - 1 - b + a),
  /// with t0 = (c1 c_eta^2)^(1/a) + 1.
  double c_a = 0.0;
  Index t0 = 1;
  /// Largest A_t t^(b-a) over the horizon and where it occurs.
  double max_scaled = 0.0;
  Index argmax_t = 1;
  double final_value = 0.0;
  /// Whether some A_t went negative (possible when 1 - eta + c1 eta^2 < 0).
  bool went_negative = false;
  bool holds = false;
};

/// Iterates the recurrence with equality from A_1 = case.a1 up to the
/// horizon and checks A_t t^(b-a) <= C_A at every step. Validates the case first.
RecurrenceReport run_recurrence(const RecurrenceCase& rc);

}  // namespace civi::harness
