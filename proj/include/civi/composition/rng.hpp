#pragma once

#include <cstdint>
#include <random>

namespace civi::composition {

/// Identifies an independent random stream within one iteration.
enum class Stream : std::uint64_t {
  kOracleF = 1,
  kOracleG = 2,
  kSmoothing = 3,
  kRotation = 4,
  kSketch = 5,
  kOutput = 6,
  kPool = 7,
  kInit = 8,
  kEvaluation = 9,
  kBaseline = 10,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Generator keyed by (seed, t, stream). Distinct keys give unrelated
/// streams, so results never depend on the order oracles are called in.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t t, Stream id);

}  // namespace civi::composition
