#include "civi/composition/rng.hpp"

#include <array>

namespace civi::composition {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t t, Stream id) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(a ^ mix64(t + 0x632be59bd9b4e019ULL));
  const std::uint64_t c = mix64(b ^ mix64(static_cast<std::uint64_t>(id) * 0xd1b54a32d192ed03ULL));
  std::array<std::uint32_t, 6> words{};
  const std::array<std::uint64_t, 3> parts{a, b, c};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    words[2 * i] = static_cast<std::uint32_t>(parts[i]);
    words[2 * i + 1] = static_cast<std::uint32_t>(parts[i] >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace civi::composition
