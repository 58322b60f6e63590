#pragma once

#include <cstdint>

#include "civi/sivi/model.hpp"

namespace civi::sivi {

/// Fixed pool of (u_i, eps_i) pairs; column i of each matrix is entry i.
struct SamplePool {
  Matrix u;    // z_dim x n, standard normal
  Matrix eps;  // eps_dim x n, drawn from the mixing distribution
  std::uint64_t seed = 0;

  [[nodiscard]] Index size() const { return u.cols(); }
};

/// Deterministic in `seed`. Throws ConfigError when n < 1.
SamplePool build_pool(const SemiImplicitModel& model, Index n, std::uint64_t seed);

}  // namespace civi::sivi
