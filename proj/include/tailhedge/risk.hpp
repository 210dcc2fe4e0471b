#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tailhedge/errors.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

namespace detail {

inline std::vector<double> sorted_losses(const std::vector<double>& pnl) {
  std::vector<double> losses(pnl.size());
  for (std::size_t i = 0; i < pnl.size(); ++i) losses[i] = -pnl[i];
  std::sort(losses.begin(), losses.end());
  return losses;
}

/// Ceiling order statistic of an ascending-sorted sample: the inf-based
/// quantile, no interpolation.
inline double quantile_of_sorted(const std::vector<double>& sorted, double alpha) {
  const auto n = static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(alpha * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline double cvar_of_sorted(const std::vector<double>& sorted, double alpha) {
  const double var = quantile_of_sorted(sorted, alpha);
  double excess = 0.0;
  for (auto it = sorted.rbegin(); it != sorted.rend() && *it > var; ++it) excess += *it - var;
  return var + excess / ((1.0 - alpha) * static_cast<double>(sorted.size()));
}

inline void check_level(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput(std::string(who) + ": alpha must be in (0,1)");
}

}  // namespace detail

/// VaR of the loss -pnl at level alpha: the ceil(alpha*N) order statistic of
/// the sorted losses.
inline double empirical_var(const std::vector<double>& pnl, double alpha) {
  detail::check_level(alpha, "empirical_var");
  if (pnl.empty()) throw InvalidInput("empirical_var: empty sample");
  return detail::quantile_of_sorted(detail::sorted_losses(pnl), alpha);
}

/// Sample CVaR in Rockafellar-Uryasev form, evaluated at the empirical VaR:
/// VaR + mean excess over VaR scaled by 1/(1-alpha).
inline double empirical_cvar(const std::vector<double>& pnl, double alpha) {
  detail::check_level(alpha, "empirical_cvar");
  if (pnl.empty()) throw InvalidInput("empirical_cvar: empty sample");
  return detail::cvar_of_sorted(detail::sorted_losses(pnl), alpha);
}

/// Median of the tail beyond VaR_alpha, which is VaR at level (1+alpha)/2.
inline double median_shortfall(const std::vector<double>& pnl, double alpha) {
  detail::check_level(alpha, "median_shortfall");
  return empirical_var(pnl, 0.5 * (1.0 + alpha));
}

using Statistic = std::function<double(const std::vector<double>&)>;

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Nonparametric percentile bootstrap. The observed statistic joins the B
/// resampled replicates, so the interval always brackets the point estimate.
inline ConfidenceInterval bootstrap_ci(const std::vector<double>& pnl, const Statistic& statistic,
                                       double level, std::size_t n_resamples, std::uint64_t seed) {
  if (pnl.empty()) throw InvalidInput("bootstrap_ci: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("bootstrap_ci: level must be in (0,1)");
  std::vector<double> replicates;
  replicates.reserve(n_resamples + 1);
  replicates.push_back(statistic(pnl));
  std::vector<double> resample(pnl.size());
  const Rng root(Rng::derive_key(seed, 0x626f6f74ull));  // "boot"
  for (std::size_t b = 0; b < n_resamples; ++b) {
    Rng rng = root.substream(b);
    for (auto& x : resample) x = pnl[rng.uniform_below(pnl.size())];
    replicates.push_back(statistic(resample));
  }
  std::sort(replicates.begin(), replicates.end());
  return {detail::quantile_of_sorted(replicates, 0.5 * (1.0 - level)),
          detail::quantile_of_sorted(replicates, 0.5 * (1.0 + level))};
}

namespace detail {

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("betacf: continued fraction did not converge");
}

/// Regularized incomplete beta function I_x(a, b).
inline double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_bt =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with df degrees of freedom.
inline double student_t_upper_tail(double t, double df) {
  const double x = df / (df + t * t);
  const double half = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half : 1.0 - half;
}

}  // namespace detail

/// One-sided paired t-test of H1: mean(pnl_a) > mean(pnl_b). Returns the
/// upper-tail p-value of t = mean(d) / (sd(d)/sqrt(N)) with d = a - b.
inline double paired_t_test(const std::vector<double>& pnl_a, const std::vector<double>& pnl_b) {
  if (pnl_a.size() != pnl_b.size()) throw InvalidInput("paired_t_test: unequal sample sizes");
  const std::size_t n = pnl_a.size();
  if (n < 2) throw InvalidInput("paired_t_test: need at least two pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += pnl_a[i] - pnl_b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pnl_a[i] - pnl_b[i] - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0.0) throw InvalidInput("paired_t_test: zero difference variance");
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  return detail::student_t_upper_tail(t, static_cast<double>(n - 1));
}

struct TailStat {
  double value = 0.0;
  ConfidenceInterval ci;
};

struct StrategyRisk {
  std::string name;
  double mean = 0.0;
  double std_err = 0.0;
  /// One-sided p-value of "reference beats this strategy"; NaN on the
  /// reference row itself.
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<TailStat> var;   // one per level
  std::vector<TailStat> cvar;  // one per level
  std::vector<TailStat> ms;    // one per level
};

struct RiskReport {
  std::vector<double> levels;
  std::string reference;
  std::vector<StrategyRisk> strategies;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Tail-risk comparison table for a set of strategies evaluated on paired
/// P&L samples. The bootstrap reuses one resample per replicate for all tail
/// statistics of a strategy; each marginal interval is still an ordinary
/// percentile bootstrap.
inline RiskReport build_report(
    const std::vector<std::pair<std::string, std::vector<double>>>& pnl_by_strategy,
    const std::string& reference, std::vector<double> levels = {0.95, 0.975},
    std::uint64_t seed = 0, std::size_t n_resamples = 1000) {
  if (pnl_by_strategy.empty()) throw InvalidInput("build_report: no strategies");
  for (double level : levels) detail::check_level(level, "build_report");
  const std::vector<double>* ref_pnl = nullptr;
  for (const auto& [name, pnl] : pnl_by_strategy) {
    if (name == reference) ref_pnl = &pnl;
  }

  RiskReport report;
  report.levels = levels;
  report.reference = reference;

  for (std::size_t si = 0; si < pnl_by_strategy.size(); ++si) {
    const auto& [name, pnl] = pnl_by_strategy[si];
    if (pnl.empty()) throw InvalidInput("build_report: empty sample for " + name);
    StrategyRisk row;
    row.name = name;
    const auto n = static_cast<double>(pnl.size());
    for (double x : pnl) row.mean += x;
    row.mean /= n;
    double ss = 0.0;
    for (double x : pnl) ss += (x - row.mean) * (x - row.mean);
    row.std_err = pnl.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    if (ref_pnl && &pnl != ref_pnl && pnl.size() == ref_pnl->size() && pnl.size() >= 2 &&
        pnl != *ref_pnl) {
      row.p_value = paired_t_test(*ref_pnl, pnl);
    }

    auto sorted = detail::sorted_losses(pnl);
    for (double level : levels) {
      row.var.push_back({detail::quantile_of_sorted(sorted, level), {}});
      row.cvar.push_back({detail::cvar_of_sorted(sorted, level), {}});
      row.ms.push_back({detail::quantile_of_sorted(sorted, 0.5 * (1.0 + level)), {}});
    }

    // shared-resample bootstrap for all tail statistics of this strategy
    const std::size_t n_stats = 3 * levels.size();
    std::vector<std::vector<double>> replicates(n_stats);
    for (auto& r : replicates) r.reserve(n_resamples + 1);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      replicates[3 * li + 0].push_back(row.var[li].value);
      replicates[3 * li + 1].push_back(row.cvar[li].value);
      replicates[3 * li + 2].push_back(row.ms[li].value);
    }
    const Rng root(Rng::derive_key(seed, 0x7265706full, si));  // "repo(rt)"
    std::vector<double> resample(pnl.size());
    for (std::size_t b = 0; b < n_resamples; ++b) {
      Rng rng = root.substream(b);
      for (auto& x : resample) x = sorted[rng.uniform_below(sorted.size())];
      std::sort(resample.begin(), resample.end());
      for (std::size_t li = 0; li < levels.size(); ++li) {
        replicates[3 * li + 0].push_back(detail::quantile_of_sorted(resample, levels[li]));
        replicates[3 * li + 1].push_back(detail::cvar_of_sorted(resample, levels[li]));
        replicates[3 * li + 2].push_back(
            detail::quantile_of_sorted(resample, 0.5 * (1.0 + levels[li])));
      }
    }
    auto percentile_ci = [](std::vector<double>& reps) {
      std::sort(reps.begin(), reps.end());
      return ConfidenceInterval{detail::quantile_of_sorted(reps, 0.025),
                                detail::quantile_of_sorted(reps, 0.975)};
    };
    for (std::size_t li = 0; li < levels.size(); ++li) {
      row.var[li].ci = percentile_ci(replicates[3 * li + 0]);
      row.cvar[li].ci = percentile_ci(replicates[3 * li + 1]);
      row.ms[li].ci = percentile_ci(replicates[3 * li + 2]);
    }
    report.strategies.push_back(std::move(row));
  }
  return report;
}

namespace detail {

inline std::string format_stat(double v) {
  char buf[40];
  if (std::isnan(v)) return "";
  if (v != 0.0 && std::abs(v) < 1e-2) {
    std::snprintf(buf, sizeof(buf), "%.4E", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.4f", v);
  }
  return buf;
}

inline std::string format_ci(const ConfidenceInterval& ci) {
  return "[" + format_stat(ci.lo) + ", " + format_stat(ci.hi) + "]";
}

}  // namespace detail

inline std::string RiskReport::to_csv() const {
  std::ostringstream out;
  auto quote = [](const std::string& cell) {
    return cell.find(',') == std::string::npos ? cell : "\"" + cell + "\"";
  };
  out << "Statistic";
  for (const auto& s : strategies) out << "," << quote(s.name);
  out << "\n";
  auto row = [&](const std::string& label, auto getter) {
    out << quote(label);
    for (const auto& s : strategies) out << "," << quote(getter(s));
    out << "\n";
  };
  row("Mean", [](const StrategyRisk& s) { return detail::format_stat(s.mean); });
  row("Std Err", [](const StrategyRisk& s) { return detail::format_stat(s.std_err); });
  row("P-Value", [](const StrategyRisk& s) { return detail::format_stat(s.p_value); });
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const std::string lvl = detail::format_stat(levels[li]);
    row(lvl + "-VaR", [li](const StrategyRisk& s) { return detail::format_stat(s.var[li].value); });
    row("0.95-CI of " + lvl + "-VaR",
        [li](const StrategyRisk& s) { return detail::format_ci(s.var[li].ci); });
  }
  {
    const std::size_t li = levels.size() - 1;
    const std::string lvl = detail::format_stat(levels[li]);
    row(lvl + "-MS", [li](const StrategyRisk& s) { return detail::format_stat(s.ms[li].value); });
    row("0.95-CI of " + lvl + "-MS",
        [li](const StrategyRisk& s) { return detail::format_ci(s.ms[li].ci); });
  }
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const std::string lvl = detail::format_stat(levels[li]);
    row(lvl + "-CVaR",
        [li](const StrategyRisk& s) { return detail::format_stat(s.cvar[li].value); });
    row("0.95-CI of " + lvl + "-CVaR",
        [li](const StrategyRisk& s) { return detail::format_ci(s.cvar[li].ci); });
  }
  return out.str();
}

inline std::string RiskReport::to_text() const {
  // collect the same cells as the CSV, then align columns
  std::vector<std::vector<std::string>> cells;
  std::istringstream csv(to_csv());
  std::string line;
  while (std::getline(csv, line)) {
    std::vector<std::string> rowCells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') {
        quoted = !quoted;
      } else if (c == ',' && !quoted) {
        rowCells.push_back(cell);
        cell.clear();
      } else {
        cell.push_back(c);
      }
    }
    rowCells.push_back(cell);
    cells.push_back(std::move(rowCells));
  }
  std::vector<std::size_t> widths;
  for (const auto& r : cells) {
    if (widths.size() < r.size()) widths.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  std::ostringstream out;
  for (const auto& r : cells) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << (i == 0 ? "" : "  ");
      out << r[i] << std::string(widths[i] - r[i].size(), ' ');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace tailhedge
