#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tailhedge/errors.hpp"

namespace tailhedge {

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Option sensitivities. All are raw partial derivatives of the price:
/// delta = dZ/dS, gamma = d2Z/dS2, vega = dZ/dsigma, theta = dZ/dt = -dZ/dtau.
struct Greeks {
  double delta = 0.0;
  double gamma = 0.0;
  double vega = 0.0;
  double theta = 0.0;
};

/// Black-Scholes price. Time is measured in days: tau is days to expiry,
/// sigma is volatility per sqrt(day), r is the risk-free rate per day.
/// tau == 0 returns the exercise value.
inline double bs_price(double s, double k, double tau, double sigma, double r, bool is_call) {
  if (s <= 0.0) throw InvalidInput("bs_price: spot must be positive");
  if (k < 0.0) throw InvalidInput("bs_price: strike must be non-negative");
  if (tau < 0.0) throw InvalidInput("bs_price: negative time to expiry");
  if (sigma < 0.0) throw InvalidInput("bs_price: negative volatility");
  if (tau == 0.0) return is_call ? std::max(s - k, 0.0) : std::max(k - s, 0.0);
  const double df = std::exp(-r * tau);
  const double stddev = sigma * std::sqrt(tau);
  if (stddev == 0.0 || k == 0.0) {
    const double forward_intrinsic = is_call ? std::max(s - k * df, 0.0) : std::max(k * df - s, 0.0);
    return forward_intrinsic;
  }
  const double d1 = (std::log(s / k) + r * tau) / stddev + 0.5 * stddev;
  const double d2 = d1 - stddev;
  if (is_call) return s * norm_cdf(d1) - k * df * norm_cdf(d2);
  return k * df * norm_cdf(-d2) - s * norm_cdf(-d1);
}

/// Analytic Greeks, consistent with bs_price. Requires tau > 0; at expiry the
/// sensitivities are not defined.
inline Greeks bs_greeks(double s, double k, double tau, double sigma, double r, bool is_call) {
  if (s <= 0.0) throw InvalidInput("bs_greeks: spot must be positive");
  if (k <= 0.0) throw InvalidInput("bs_greeks: strike must be positive");
  if (tau <= 0.0) throw InvalidInput("bs_greeks: tau must be positive");
  if (sigma <= 0.0) throw InvalidInput("bs_greeks: sigma must be positive");
  const double sqrt_tau = std::sqrt(tau);
  const double stddev = sigma * sqrt_tau;
  const double d1 = (std::log(s / k) + r * tau) / stddev + 0.5 * stddev;
  const double d2 = d1 - stddev;
  const double df = std::exp(-r * tau);
  Greeks g;
  g.delta = is_call ? norm_cdf(d1) : norm_cdf(d1) - 1.0;
  g.gamma = norm_pdf(d1) / (s * stddev);
  g.vega = s * norm_pdf(d1) * sqrt_tau;
  const double decay = -s * norm_pdf(d1) * sigma / (2.0 * sqrt_tau);
  g.theta = is_call ? decay - r * k * df * norm_cdf(d2) : decay + r * k * df * norm_cdf(-d2);
  return g;
}

namespace detail {
inline constexpr double kImpliedVolFloor = 1e-8;
inline double implied_vol_cap() { return 10.0 / std::sqrt(252.0); }
}  // namespace detail

/// Invert bs_price for sigma: bisection over [1e-8, 10/sqrt(252)], then Newton
/// polish, to 1e-10 absolute in price. Prices outside the no-arbitrage band of
/// the bracket are rejected.
inline double implied_vol(double price, double s, double k, double tau, double r, bool is_call) {
  if (tau <= 0.0) throw InvalidInput("implied_vol: tau must be positive");
  double lo = detail::kImpliedVolFloor;
  double hi = detail::implied_vol_cap();
  const double price_lo = bs_price(s, k, tau, lo, r, is_call);
  const double price_hi = bs_price(s, k, tau, hi, r, is_call);
  constexpr double tol = 1e-10;
  if (price < price_lo - tol || price > price_hi + tol) {
    throw NumericError("implied_vol: price " + std::to_string(price) +
                       " outside attainable range [" + std::to_string(price_lo) + ", " +
                       std::to_string(price_hi) + "]");
  }
  if (price <= price_lo) return lo;
  if (price >= price_hi) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (bs_price(s, k, tau, mid, r, is_call) < price) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) break;
  }
  double sigma = 0.5 * (lo + hi);
  for (int i = 0; i < 20; ++i) {
    const double diff = bs_price(s, k, tau, sigma, r, is_call) - price;
    if (std::abs(diff) < tol) break;
    const double vega = bs_greeks(s, k, tau, sigma, r, is_call).vega;
    if (vega < 1e-16) break;
    double next = sigma - diff / vega;
    next = std::clamp(next, detail::kImpliedVolFloor, detail::implied_vol_cap());
    if (next == sigma) break;
    sigma = next;
  }
  return sigma;
}

}  // namespace tailhedge
