#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "tailhedge/black_scholes.hpp"
#include "tailhedge/errors.hpp"
#include "tailhedge/gbm.hpp"
#include "tailhedge/parallel.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

/// GARCH(1,1) with leverage, daily time unit. Physical dynamics:
///   log(S_t/S_{t-1}) = r + lambda_rp * h_t + sqrt(h_t) * z_t
///   h_t = omega_g + beta_g * h_{t-1} + alpha_g * (z_{t-1} - gamma_g * sqrt(h_{t-1}))^2
/// where h_t is the conditional variance of the day-t return. Under the
/// pricing measure the drift becomes r - h_t/2 and the leverage coefficient
/// becomes gamma_star() = gamma_g + 1/2 + lambda_rp.
struct GarchParams {
  double lambda_rp = 0.0;
  double omega_g = 0.0;
  double alpha_g = 0.0;
  double beta_g = 0.0;
  double gamma_g = 0.0;
  double r = 0.0;

  double gamma_star() const { return gamma_g + 0.5 + lambda_rp; }

  void validate() const {
    if (omega_g <= 0.0) throw InvalidInput("GarchParams: omega_g must be positive");
    if (alpha_g <= 0.0) throw InvalidInput("GarchParams: alpha_g must be positive");
    if (beta_g <= 0.0) throw InvalidInput("GarchParams: beta_g must be positive");
    if (gamma_g <= 0.0) throw InvalidInput("GarchParams: gamma_g must be positive");
    if (alpha_g * gamma_g * gamma_g + beta_g >= 1.0) {
      throw InvalidInput("GarchParams: stationarity requires alpha*gamma^2 + beta < 1");
    }
  }

  /// Long-run mean of the conditional variance under the physical measure.
  double unconditional_variance() const {
    return (omega_g + alpha_g) / (1.0 - beta_g - alpha_g * gamma_g * gamma_g);
  }
};

namespace detail {

inline constexpr std::uint64_t kGarchStreamTag = 0x6761726368ull;  // "garch"

inline std::vector<PricePath> garch_simulate(const GarchParams& params, double s0, double sigma1_sq,
                                             std::size_t n_steps, std::size_t n_paths,
                                             std::uint64_t seed, bool risk_neutral,
                                             unsigned threads) {
  params.validate();
  if (s0 <= 0.0) throw InvalidInput("garch_simulate: s0 must be positive");
  if (sigma1_sq <= 0.0) throw InvalidInput("garch_simulate: sigma1_sq must be positive");
  if (n_steps < 1) throw InvalidInput("garch_simulate: n_steps must be at least 1");
  const double leverage = risk_neutral ? params.gamma_star() : params.gamma_g;
  std::vector<PricePath> paths(n_paths);
  const Rng root(Rng::derive_key(seed, kGarchStreamTag, risk_neutral ? 1ull : 0ull));
  parallel_for(n_paths, threads, [&](std::size_t i) {
    Rng rng = root.substream(i);
    auto& path = paths[i];
    path.prices.resize(n_steps + 1);
    path.variances.resize(n_steps + 1);
    path.prices[0] = s0;
    double h = sigma1_sq;
    path.variances[0] = h;
    for (std::size_t t = 0; t < n_steps; ++t) {
      const double vol = std::sqrt(h);
      const double z = rng.normal();
      const double drift = risk_neutral ? params.r - 0.5 * h : params.r + params.lambda_rp * h;
      path.prices[t + 1] = path.prices[t] * std::exp(drift + vol * z);
      h = params.omega_g + params.beta_g * h +
          params.alpha_g * (z - leverage * vol) * (z - leverage * vol);
      path.variances[t + 1] = h;
    }
  });
  return paths;
}

}  // namespace detail

inline std::vector<PricePath> garch_simulate_physical(const GarchParams& params, double s0,
                                                      double sigma1_sq, std::size_t n_steps,
                                                      std::size_t n_paths, std::uint64_t seed,
                                                      unsigned threads = 1) {
  return detail::garch_simulate(params, s0, sigma1_sq, n_steps, n_paths, seed, false, threads);
}

inline std::vector<PricePath> garch_simulate_risk_neutral(const GarchParams& params, double s0,
                                                          double sigma1_sq, std::size_t n_steps,
                                                          std::size_t n_paths, std::uint64_t seed,
                                                          unsigned threads = 1) {
  return detail::garch_simulate(params, s0, sigma1_sq, n_steps, n_paths, seed, true, threads);
}

namespace detail {

/// log E*[S_T^phi | S_t = s, h_{t+1} = next_var] for complex phi under the
/// pricing measure, from the affine recursion of the conditional moment
/// generating function. tau is the number of daily steps to expiry.
inline std::complex<double> hn_log_mgf(std::complex<double> phi, double log_s, double next_var,
                                       std::size_t tau, const GarchParams& p) {
  const double gs = p.gamma_star();
  std::complex<double> a(0.0, 0.0);
  std::complex<double> b(0.0, 0.0);
  for (std::size_t i = 0; i < tau; ++i) {
    const std::complex<double> one_minus = 1.0 - 2.0 * p.alpha_g * b;
    const std::complex<double> b_next = phi * (-0.5 + gs) - 0.5 * gs * gs + p.beta_g * b +
                                        0.5 * (phi - gs) * (phi - gs) / one_minus;
    a += phi * p.r + b * p.omega_g - 0.5 * std::log(one_minus);
    b = b_next;
  }
  return phi * log_s + a + b * next_var;
}

struct HnIntegrands {
  double log_s;
  double log_k;
  double next_var;
  std::size_t tau;
  const GarchParams* params;

  // Re[K^{-i phi} f(i phi + 1) / (i phi)] and Re[K^{-i phi} f(i phi) / (i phi)]
  void eval(double phi, double& for_p1, double& for_p2) const {
    const std::complex<double> iphi(0.0, phi);
    const std::complex<double> twist = -iphi * log_k;
    const std::complex<double> f1 =
        std::exp(hn_log_mgf(iphi + 1.0, log_s, next_var, tau, *params) + twist) / iphi;
    const std::complex<double> f2 =
        std::exp(hn_log_mgf(iphi, log_s, next_var, tau, *params) + twist) / iphi;
    for_p1 = f1.real();
    for_p2 = f2.real();
  }
};

/// Adaptive quadrature over one segment: a trapezoid ladder with Simpson
/// extrapolation, refined until both component integrals stabilize. Returns
/// false if the refinement budget is exhausted.
inline bool hn_integrate_segment(const HnIntegrands& f, double lo, double hi, double tol,
                                 double& out1, double& out2) {
  double lo1, lo2, hi1, hi2;
  f.eval(lo, lo1, lo2);
  f.eval(hi, hi1, hi2);
  double trap1 = 0.5 * (lo1 + hi1) * (hi - lo);
  double trap2 = 0.5 * (lo2 + hi2) * (hi - lo);
  double simp1 = trap1, simp2 = trap2;
  std::size_t intervals = 1;
  for (int depth = 0; depth < 18; ++depth) {
    double add1 = 0.0, add2 = 0.0;
    const double step = (hi - lo) / static_cast<double>(intervals);
    for (std::size_t j = 0; j < intervals; ++j) {
      double v1, v2;
      f.eval(lo + (static_cast<double>(j) + 0.5) * step, v1, v2);
      add1 += v1;
      add2 += v2;
    }
    const double next_trap1 = 0.5 * trap1 + 0.5 * step * add1;
    const double next_trap2 = 0.5 * trap2 + 0.5 * step * add2;
    const double next_simp1 = (4.0 * next_trap1 - trap1) / 3.0;
    const double next_simp2 = (4.0 * next_trap2 - trap2) / 3.0;
    const bool done =
        depth >= 3 && std::abs(next_simp1 - simp1) <= tol && std::abs(next_simp2 - simp2) <= tol;
    trap1 = next_trap1;
    trap2 = next_trap2;
    simp1 = next_simp1;
    simp2 = next_simp2;
    intervals *= 2;
    if (done) {
      out1 = simp1;
      out2 = simp2;
      return true;
    }
  }
  out1 = simp1;
  out2 = simp2;
  return false;
}

}  // namespace detail

/// European option price under the GARCH model, by numerical inversion of the
/// conditional moment generating function. next_var is the conditional
/// variance of the next daily return; tau is a whole number of days.
inline double hn_price(double s, double k, std::size_t tau, double next_var,
                       const GarchParams& params, bool is_call) {
  params.validate();
  if (s <= 0.0 || k <= 0.0) throw InvalidInput("hn_price: spot and strike must be positive");
  if (tau < 1) throw InvalidInput("hn_price: tau must be at least one day");
  if (next_var <= 0.0) throw InvalidInput("hn_price: next_var must be positive");

  const detail::HnIntegrands f{std::log(s), std::log(k), next_var, tau, &params};

  // The transform decays like exp(-phi^2 * V / 2); size the frequency grid to
  // the total variance over the horizon.
  const double total_var =
      std::max(1e-12, static_cast<double>(tau) *
                          std::max(next_var, 0.25 * params.unconditional_variance()));
  const double phi_max = std::sqrt(90.0 / total_var);
  const double seg_len = std::max(1.0, std::min(phi_max / 8.0, 40.0));
  const double tol = 1e-13 * (s + k);

  // Near phi = 0 the Re[.]/phi form loses precision to cancellation, so cover
  // [0, phi_min] with one midpoint-rule sliver of a smooth integrand.
  const double phi_min = 1e-4;
  double mid1, mid2;
  f.eval(0.5 * phi_min, mid1, mid2);
  double int1 = phi_min * mid1;
  double int2 = phi_min * mid2;
  double lo = phi_min;
  bool converged = false;
  int quiet_segments = 0;
  for (int seg = 0; seg < 4096; ++seg) {
    double part1, part2;
    if (!detail::hn_integrate_segment(f, lo, lo + seg_len, tol, part1, part2)) {
      throw NumericError("hn_price: segment refinement did not converge");
    }
    int1 += part1;
    int2 += part2;
    lo += seg_len;
    if (std::abs(part1) < tol && std::abs(part2) < tol) {
      if (++quiet_segments >= 2 && lo >= phi_max) {
        converged = true;
        break;
      }
    } else {
      quiet_segments = 0;
    }
  }
  if (!converged) throw NumericError("hn_price: frequency grid exhausted before convergence");

  const double df = std::exp(-params.r * static_cast<double>(tau));
  const double p1 = 0.5 + df / (std::numbers::pi * s) * int1;
  const double p2 = 0.5 + int2 / std::numbers::pi;
  const double call = s * p1 - k * df * p2;
  const double price = is_call ? call : call - s + k * df;
  if (!std::isfinite(price)) throw NumericError("hn_price: non-finite result");
  return price;
}

struct McPrice {
  double price = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo price under the risk-neutral GARCH dynamics; the independent
/// check for hn_price. Deterministic in (seed); the reduction order is fixed
/// regardless of thread count.
inline McPrice hn_mc_price(double s, double k, std::size_t tau, double next_var,
                           const GarchParams& params, bool is_call, std::size_t n_paths,
                           std::uint64_t seed, unsigned threads = 1) {
  params.validate();
  if (s <= 0.0 || k <= 0.0) throw InvalidInput("hn_mc_price: spot and strike must be positive");
  if (tau < 1) throw InvalidInput("hn_mc_price: tau must be at least one day");
  if (next_var <= 0.0) throw InvalidInput("hn_mc_price: next_var must be positive");
  if (n_paths < 2) throw InvalidInput("hn_mc_price: need at least two paths");
  const double gs = params.gamma_star();
  std::vector<double> payoffs(n_paths);
  const Rng root(Rng::derive_key(seed, detail::kGarchStreamTag, 2ull));
  parallel_for(n_paths, threads, [&](std::size_t i) {
    Rng rng = root.substream(i);
    double log_s = std::log(s);
    double h = next_var;
    for (std::size_t t = 0; t < tau; ++t) {
      const double vol = std::sqrt(h);
      const double z = rng.normal();
      log_s += params.r - 0.5 * h + vol * z;
      h = params.omega_g + params.beta_g * h + params.alpha_g * (z - gs * vol) * (z - gs * vol);
    }
    const double st = std::exp(log_s);
    payoffs[i] = is_call ? std::max(st - k, 0.0) : std::max(k - st, 0.0);
  });
  double sum = 0.0;
  for (double p : payoffs) sum += p;
  const double mean = sum / static_cast<double>(n_paths);
  double ss = 0.0;
  for (double p : payoffs) ss += (p - mean) * (p - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_paths - 1));
  const double df = std::exp(-params.r * static_cast<double>(tau));
  return {df * mean, df * sd / std::sqrt(static_cast<double>(n_paths))};
}

/// Hedge ratio under the GARCH model: central difference of hn_price in the
/// spot with the next-period variance held fixed. Bump is 1e-4 * s.
inline double garch_delta(double s, double k, std::size_t tau, double next_var,
                          const GarchParams& params, bool is_call) {
  const double h = 1e-4 * s;
  const double up = hn_price(s + h, k, tau, next_var, params, is_call);
  const double dn = hn_price(s - h, k, tau, next_var, params, is_call);
  return (up - dn) / (2.0 * h);
}

}  // namespace tailhedge
