#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tailhedge/errors.hpp"
#include "tailhedge/parallel.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

/// Geometric Brownian motion parameters, all quoted per trading day:
/// mu is the drift per day, sigma the volatility per sqrt(day), r the
/// risk-free rate per day.
struct GbmParams {
  double mu = 0.0;
  double sigma = 0.0;
  double r = 0.0;

  void validate() const {
    if (sigma < 0.0) throw InvalidInput("GbmParams: sigma must be non-negative");
  }
};

/// One simulated daily price path. variances, when non-empty, holds the
/// conditional variance of the *next* daily log return, aligned with prices
/// (variances[t] applies to the step from t to t+1).
struct PricePath {
  std::vector<double> prices;
  std::vector<double> variances;
};

namespace detail {
inline constexpr std::uint64_t kGbmStreamTag = 0x67626d00ull;  // "gbm"
}

/// Exact lognormal daily steps: S_{t+1} = S_t * exp(mu - sigma^2/2 + sigma*z).
/// Path i is drawn from substream (seed, tag, i), so output is independent of
/// how paths are sharded across workers.
inline std::vector<PricePath> gbm_simulate(const GbmParams& params, double s0, std::size_t n_steps,
                                           std::size_t n_paths, std::uint64_t seed,
                                           unsigned threads = 1) {
  params.validate();
  if (s0 <= 0.0) throw InvalidInput("gbm_simulate: s0 must be positive");
  if (n_steps < 1) throw InvalidInput("gbm_simulate: n_steps must be at least 1");
  const double drift = params.mu - 0.5 * params.sigma * params.sigma;
  std::vector<PricePath> paths(n_paths);
  const Rng root(Rng::derive_key(seed, detail::kGbmStreamTag));
  parallel_for(n_paths, threads, [&](std::size_t i) {
    Rng rng = root.substream(i);
    auto& prices = paths[i].prices;
    prices.resize(n_steps + 1);
    prices[0] = s0;
    for (std::size_t t = 0; t < n_steps; ++t) {
      prices[t + 1] = prices[t] * std::exp(drift + params.sigma * rng.normal());
    }
  });
  return paths;
}

}  // namespace tailhedge
