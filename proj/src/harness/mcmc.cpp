#include "civi/harness/mcmc.hpp"

#include <cmath>
#include <random>

#include "civi/composition/rng.hpp"

namespace civi::harness {

McmcResult random_walk_metropolis(const std::function<double(const Vector&)>& log_density,
                                  const Vector& start, const McmcOptions& options, std::uint64_t seed) {
  const Index d = start.size();
  if (d < 1) throw ConfigError("random_walk_metropolis: empty start point");
  if (!(options.burn_in >= 0.0 && options.burn_in < 1.0)) {
    throw ConfigError("random_walk_metropolis: burn-in fraction must lie in [0, 1)");
  }
  const Index burn = static_cast<Index>(std::floor(options.burn_in * static_cast<double>(options.steps)));
  const Index kept_steps = options.steps - burn;
  if (options.keep < 1 || kept_steps < options.keep) {
    throw ConfigError("random_walk_metropolis: fewer post-burn-in steps than samples to keep");
  }
  auto rng = composition::make_stream(seed, 0, composition::Stream::kEvaluation);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vector x = start;
  double lp = log_density(x);
  if (!std::isfinite(lp)) throw NumericError("random_walk_metropolis: start point has non-finite density");
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  const Index thin = kept_steps / options.keep;

  McmcResult out;
  out.samples.resize(d, options.keep);
  Index stored = 0;
  Index accepted = 0;
  Vector proposal(d);
  for (Index s = 0; s < options.steps; ++s) {
    const double scale = std::exp(log_scale);
    for (Index i = 0; i < d; ++i) proposal(i) = x(i) + scale * normal(rng);
    const double lq = log_density(proposal);
    const double log_ratio = lq - lp;
    const bool accept = std::isfinite(lq) && (log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio);
    if (accept) {
      x = proposal;
      lp = lq;
    }
    if (s < burn) {
      const double a = accept ? 1.0 : 0.0;
      log_scale += (a - options.target_acceptance) / std::sqrt(static_cast<double>(s) + 1.0);
    } else {
      accepted += accept ? 1 : 0;
      const Index k = s - burn;
      if (k % thin == thin - 1 && stored < options.keep) out.samples.col(stored++) = x;
    }
  }
  out.acceptance = static_cast<double>(accepted) / static_cast<double>(kept_steps);
  out.scale = std::exp(log_scale);
  out.warning = out.acceptance < 0.05 || out.acceptance > 0.7;
  return out;
}

}  // namespace civi::harness
