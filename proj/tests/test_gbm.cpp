#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailhedge/gbm.hpp"

using namespace tailhedge;

TEST_CASE("gbm zero-noise path is the deterministic exponential", "[gbm]") {
  GbmParams params{0.1 / 252.0, 0.0, 0.0};
  const auto paths = gbm_simulate(params, 100.0, 252, 3, 11);
  for (const auto& p : paths) {
    REQUIRE(p.prices.size() == 253);
    CHECK_THAT(p.prices.back(), Catch::Matchers::WithinRel(100.0 * std::exp(0.1), 1e-12));
  }
}

TEST_CASE("gbm rejects bad inputs", "[gbm]") {
  CHECK_THROWS_AS(gbm_simulate({0.0, -0.1, 0.0}, 100.0, 10, 1, 0), InvalidInput);
  CHECK_THROWS_AS(gbm_simulate({0.0, 0.1, 0.0}, -5.0, 10, 1, 0), InvalidInput);
  CHECK_THROWS_AS(gbm_simulate({0.0, 0.1, 0.0}, 100.0, 0, 1, 0), InvalidInput);
}

TEST_CASE("gbm mean log-return matches the closed form", "[gbm][slow]") {
  GbmParams params{0.1 / 252.0, 0.2 / std::sqrt(252.0), 0.03 / 365.0};
  const std::size_t n_paths = 1'000'000;
  const auto paths = gbm_simulate(params, 100.0, 30, n_paths, 2024);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& p : paths) {
    const double x = std::log(p.prices.back() / p.prices.front());
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n_paths;
  const double var = sum_sq / n_paths - mean * mean;
  const double se = std::sqrt(var / n_paths);
  const double expected = 30.0 * (params.mu - 0.5 * params.sigma * params.sigma);
  CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("gbm is deterministic and shard-invariant", "[gbm]") {
  GbmParams params{0.1 / 252.0, 0.2 / std::sqrt(252.0), 0.0};
  const auto a = gbm_simulate(params, 100.0, 20, 64, 5, 1);
  const auto b = gbm_simulate(params, 100.0, 20, 64, 5, 1);
  const auto c = gbm_simulate(params, 100.0, 20, 64, 5, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prices == b[i].prices);
    CHECK(a[i].prices == c[i].prices);
  }
  const auto d = gbm_simulate(params, 100.0, 20, 64, 6, 1);
  CHECK(a[0].prices != d[0].prices);
}
