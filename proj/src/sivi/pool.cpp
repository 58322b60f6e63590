#include "civi/sivi/pool.hpp"

#include "civi/composition/rng.hpp"

namespace civi::sivi {

SamplePool build_pool(const SemiImplicitModel& model, Index n, std::uint64_t seed) {
  if (n < 1) {
    throw ConfigError("build_pool: pool size must be at least 1");
  }
  model.validate();
  auto rng = composition::make_stream(seed, 0, composition::Stream::kPool);
  SamplePool pool;
  pool.seed = seed;
  pool.u = standard_normal(model.z_dim, n, rng);
  pool.eps = model.sample_eps(n, rng);
  return pool;
}

}  // namespace civi::sivi
