#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailhedge/black_scholes.hpp"
#include "tailhedge/rng.hpp"

using namespace tailhedge;

namespace {

// Reference Black-Scholes written independently of the library: works in
// forward terms with its own normal CDF (Hart-style rational approximation is
// overkill here; erf is exact enough and the algebra is organized differently).
double ref_norm_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double ref_bs(double s, double k, double tau, double sigma, double r, bool is_call) {
  const double df = std::exp(-r * tau);
  const double fwd = s / df;
  const double sd = sigma * std::sqrt(tau);
  const double d2 = std::log(fwd / k) / sd - 0.5 * sd;
  const double d1 = d2 + sd;
  const double call = df * (fwd * ref_norm_cdf(d1) - k * ref_norm_cdf(d2));
  if (is_call) return call;
  return call - df * (fwd - k);  // parity
}

}  // namespace

TEST_CASE("bs_price degenerate cases", "[black_scholes]") {
  CHECK(bs_price(110.0, 100.0, 30.0, 0.0, 0.0, true) == 10.0);
  CHECK(bs_price(90.0, 100.0, 30.0, 0.0, 0.0, true) == 0.0);
  CHECK(bs_price(100.0, 0.0, 30.0, 0.2 / std::sqrt(252.0), 0.0, true) == 100.0);
  // expiry returns exercise value
  CHECK(bs_price(104.0, 100.0, 0.0, 0.3, 0.01, true) == 4.0);
  CHECK(bs_price(104.0, 100.0, 0.0, 0.3, 0.01, false) == 0.0);
  CHECK_THROWS_AS(bs_price(100.0, 100.0, -1.0, 0.2, 0.0, true), InvalidInput);
  CHECK_THROWS_AS(bs_price(-1.0, 100.0, 1.0, 0.2, 0.0, true), InvalidInput);
  CHECK_THROWS_AS(bs_price(100.0, 100.0, 1.0, -0.2, 0.0, true), InvalidInput);
}

TEST_CASE("bs_price matches an independent reference", "[black_scholes]") {
  const double sigma = 0.2 / std::sqrt(252.0);
  const double r = 0.03 / 365.0;
  CHECK_THAT(bs_price(100.0, 105.0, 30.0, sigma, r, true),
             Catch::Matchers::WithinAbs(ref_bs(100.0, 105.0, 30.0, sigma, r, true), 1e-10));

  Rng rng(Rng::derive_key(7, 1));
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(20.0, 500.0);
    const double k = rng.uniform(20.0, 500.0);
    const double tau = std::floor(rng.uniform(1.0, 300.0));
    const double vol = rng.uniform(0.05, 0.6) / std::sqrt(252.0);
    const double rate = rng.uniform(0.0, 0.1) / 365.0;
    const bool call = rng.uniform() < 0.5;
    CHECK_THAT(bs_price(s, k, tau, vol, rate, call),
               Catch::Matchers::WithinAbs(ref_bs(s, k, tau, vol, rate, call), 1e-10));
  }
}

TEST_CASE("put-call parity", "[black_scholes]") {
  Rng rng(Rng::derive_key(7, 2));
  for (int i = 0; i < 500; ++i) {
    const double s = rng.uniform(10.0, 900.0);
    const double k = rng.uniform(10.0, 900.0);
    const double tau = std::floor(rng.uniform(1.0, 400.0));
    const double vol = rng.uniform(0.01, 0.9) / std::sqrt(252.0);
    const double rate = rng.uniform(0.0, 0.12) / 365.0;
    const double call = bs_price(s, k, tau, vol, rate, true);
    const double put = bs_price(s, k, tau, vol, rate, false);
    CHECK_THAT(call - put, Catch::Matchers::WithinAbs(s - k * std::exp(-rate * tau), 1e-10));
  }
}

TEST_CASE("bs_greeks ranges and symmetry", "[black_scholes]") {
  Rng rng(Rng::derive_key(7, 3));
  for (int i = 0; i < 300; ++i) {
    // keep |d1| moderate: at extreme moneyness the exact delta rounds to 0 or 1
    const double s = rng.uniform(10.0, 900.0);
    const double tau = std::floor(rng.uniform(15.0, 250.0));
    const double vol = rng.uniform(0.15, 0.5) / std::sqrt(252.0);
    const double k = s * std::exp(rng.uniform(-3.0, 3.0) * vol * std::sqrt(tau));
    const double rate = rng.uniform(0.0, 0.12) / 365.0;
    const Greeks call = bs_greeks(s, k, tau, vol, rate, true);
    const Greeks put = bs_greeks(s, k, tau, vol, rate, false);
    CHECK(call.delta > 0.0);
    CHECK(call.delta < 1.0);
    CHECK(put.delta > -1.0);
    CHECK(put.delta < 0.0);
    CHECK(call.gamma == put.gamma);
    CHECK(call.vega == put.vega);
  }
  CHECK_THROWS_AS(bs_greeks(100.0, 100.0, 0.0, 0.2, 0.0, true), InvalidInput);
}

TEST_CASE("bs_greeks agree with finite differences of bs_price", "[black_scholes]") {
  Rng rng(Rng::derive_key(7, 4));
  for (int i = 0; i < 100; ++i) {
    // the 1e-5 relative bound needs deltas away from zero; sample |d1| <~ 1.8
    const double s = rng.uniform(50.0, 200.0);
    const double tau = std::floor(rng.uniform(15.0, 200.0));
    const double vol = rng.uniform(0.15, 0.5) / std::sqrt(252.0);
    const double k = s * std::exp(rng.uniform(-1.8, 1.8) * vol * std::sqrt(tau));
    const double rate = rng.uniform(0.0, 0.1) / 365.0;
    const bool call = rng.uniform() < 0.5;
    const Greeks g = bs_greeks(s, k, tau, vol, rate, call);

    // central differences carry an O(h^2) truncation term, so the tight bound
    // uses the smaller bump
    const double hs = 1e-4 * s;
    const double fd_delta =
        (bs_price(s + hs, k, tau, vol, rate, call) - bs_price(s - hs, k, tau, vol, rate, call)) /
        (2.0 * hs);
    CHECK_THAT(fd_delta, Catch::Matchers::WithinRel(g.delta, 1e-5));

    const double hc = 1e-3 * s;
    const double fd_delta_coarse =
        (bs_price(s + hc, k, tau, vol, rate, call) - bs_price(s - hc, k, tau, vol, rate, call)) /
        (2.0 * hc);
    CHECK_THAT(fd_delta_coarse, Catch::Matchers::WithinRel(g.delta, 1e-4));

    const double fd_gamma = (bs_price(s + hc, k, tau, vol, rate, call) -
                             2.0 * bs_price(s, k, tau, vol, rate, call) +
                             bs_price(s - hc, k, tau, vol, rate, call)) /
                            (hc * hc);
    CHECK_THAT(fd_gamma, Catch::Matchers::WithinRel(g.gamma, 1e-4));

    const double hv = 1e-6;
    const double fd_vega =
        (bs_price(s, k, tau, vol + hv, rate, call) - bs_price(s, k, tau, vol - hv, rate, call)) /
        (2.0 * hv);
    CHECK_THAT(fd_vega, Catch::Matchers::WithinRel(g.vega, 1e-5));

    const double ht = 1e-4;
    const double fd_theta =
        -(bs_price(s, k, tau + ht, vol, rate, call) - bs_price(s, k, tau - ht, vol, rate, call)) /
        (2.0 * ht);
    CHECK_THAT(fd_theta, Catch::Matchers::WithinRel(g.theta, 1e-4));
  }
}

TEST_CASE("implied_vol round trips", "[black_scholes]") {
  const double sigma0 = 0.2 / std::sqrt(252.0);
  const double price = bs_price(100.0, 105.0, 30.0, sigma0, 0.03 / 365.0, true);
  CHECK_THAT(implied_vol(price, 100.0, 105.0, 30.0, 0.03 / 365.0, true),
             Catch::Matchers::WithinAbs(sigma0, 1e-8));

  Rng rng(Rng::derive_key(7, 5));
  for (int i = 0; i < 300; ++i) {
    const double s = rng.uniform(50.0, 400.0);
    const double k = s * rng.uniform(0.7, 1.3);
    const double tau = std::floor(rng.uniform(2.0, 300.0));
    const double vol = rng.uniform(0.05, 0.8) / std::sqrt(252.0);
    const double rate = rng.uniform(0.0, 0.1) / 365.0;
    const bool call = rng.uniform() < 0.5;
    const double p = bs_price(s, k, tau, vol, rate, call);
    CHECK_THAT(implied_vol(p, s, k, tau, rate, call), Catch::Matchers::WithinAbs(vol, 1e-6));
  }
}

TEST_CASE("implied_vol boundary and failure cases", "[black_scholes]") {
  // price at the zero-vol limit resolves to the bracket floor
  const double floor_price = bs_price(120.0, 100.0, 30.0, 1e-8, 0.0, true);
  CHECK(implied_vol(floor_price, 120.0, 100.0, 30.0, 0.0, true) ==
        Catch::Approx(1e-8).margin(1e-9));
  // below intrinsic: no solution
  CHECK_THROWS_AS(implied_vol(19.0, 120.0, 100.0, 30.0, 0.0, true), NumericError);
  // above the spot: no solution
  CHECK_THROWS_AS(implied_vol(121.0, 120.0, 100.0, 30.0, 0.0, true), NumericError);
  CHECK_THROWS_AS(implied_vol(1.0, 100.0, 100.0, 0.0, 0.0, true), InvalidInput);
}
