#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tailhedge/calendar.hpp"
#include "tailhedge/errors.hpp"
#include "tailhedge/gbm.hpp"

namespace tailhedge {

struct OptionContract {
  std::string option_id;
  bool is_call = true;
  double strike = 0.0;
  long list_date = 0;
  long expiry_date = 0;
};

/// One observation day of an option record. next_var carries the model's
/// forecast variance of the next daily return where a model is available;
/// it is not part of the external CSV format.
struct EpisodeStep {
  long date = 0;
  double underlying = 0.0;
  double option_price = 0.0;
  double implied_vol = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  double vega = 0.0;
  double theta = 0.0;
  double rate = 0.0;
  double next_var = 0.0;
};

/// A hedging problem: observations from 'today' through expiry, one step per
/// observation day, with the exercise value at expiry as the final price.
struct OptionEpisode {
  OptionContract contract;
  long today = 0;
  std::vector<EpisodeStep> steps;
  double payoff = 0.0;

  std::size_t n_hedge_steps() const { return steps.empty() ? 0 : steps.size() - 1; }
  double moneyness() const { return contract.strike / steps.front().underlying; }
};

enum class StrikeBand { near, mid, far };

struct BandRule {
  double lo_ratio;
  double hi_ratio;
  double interval;
  long min_days;
  long max_days;
};

/// Listing bands: strikes around the exercise reference price on a fixed
/// point grid, for expiries inside each band's maturity window (in trading
/// days: roughly 1wk-2mo, 2-6mo, 6-12mo).
struct ListingRules {
  std::array<BandRule, 3> bands{{{0.9, 1.1, 5.0, 5, 42},
                                 {0.8, 1.2, 10.0, 43, 126},
                                 {0.5, 1.5, 25.0, 127, 252}}};

  const BandRule& band(StrikeBand b) const { return bands[static_cast<std::size_t>(b)]; }
};

/// Strike grid for one band: integer multiples of the band interval covering
/// [lo_ratio, hi_ratio] * ref_price. Never empty; a reference price below one
/// interval clips to the lowest positive multiple.
inline std::vector<double> list_strikes(double ref_price, const BandRule& rule) {
  if (ref_price <= 0.0) throw InvalidInput("list_strikes: ref_price must be positive");
  const double lo = rule.lo_ratio * ref_price;
  const double hi = rule.hi_ratio * ref_price;
  long lo_mult = static_cast<long>(std::ceil(lo / rule.interval - 1e-9));
  lo_mult = std::max(lo_mult, 1L);
  long hi_mult = static_cast<long>(std::floor(hi / rule.interval + 1e-9));
  hi_mult = std::max(hi_mult, lo_mult);
  std::vector<double> strikes;
  strikes.reserve(static_cast<std::size_t>(hi_mult - lo_mult + 1));
  for (long m = lo_mult; m <= hi_mult; ++m) strikes.push_back(static_cast<double>(m) * rule.interval);
  return strikes;
}

inline std::vector<double> list_strikes(double ref_price, StrikeBand band,
                                        const ListingRules& rules = {}) {
  return list_strikes(ref_price, rules.band(band));
}

namespace detail {

inline std::string make_option_id(bool is_call, double strike, long expiry) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%c%08lld_%06ld", is_call ? 'C' : 'P',
                static_cast<long long>(std::llround(strike * 100.0)), expiry);
  return buf;
}

struct PairHash {
  std::size_t operator()(const std::pair<long long, long>& p) const {
    return std::hash<long long>()(p.first * 1000003LL + p.second);
  }
};

}  // namespace detail

/// Daily call listing along a price path. Day d uses the previous close as
/// exercise reference price. Each band keeps its current strike grid until
/// the reference price moves out of its current strike interval (the grid
/// cell of the band's spacing), then a new group is listed; (strike, expiry)
/// pairs are never listed twice.
inline std::vector<OptionContract> list_contracts(const std::vector<double>& closes,
                                                  const TradingCalendar& calendar = {},
                                                  const ListingRules& rules = {},
                                                  bool is_call = true) {
  if (closes.size() < 2) throw InvalidInput("list_contracts: need at least two closes");
  std::vector<OptionContract> contracts;
  std::unordered_set<std::pair<long long, long>, detail::PairHash> listed;
  struct BandState {
    bool active = false;
    long cell = 0;
    std::vector<double> grid;
  };
  std::array<BandState, 3> states;
  const long last_day = static_cast<long>(closes.size()) - 1;
  for (long day = 1; day <= last_day; ++day) {
    const double ref = closes[static_cast<std::size_t>(day - 1)];
    for (std::size_t bi = 0; bi < rules.bands.size(); ++bi) {
      const BandRule& rule = rules.bands[bi];
      BandState& state = states[bi];
      const long cell = static_cast<long>(std::floor(ref / rule.interval));
      if (!state.active || cell != state.cell) {
        state.grid = list_strikes(ref, rule);
        state.cell = cell;
        state.active = true;
      }
      const auto expiries = calendar.expiries_between(day + rule.min_days, day + rule.max_days);
      for (long expiry : expiries) {
        if (expiry > last_day) continue;  // cannot price past the path
        for (double strike : state.grid) {
          const auto key = std::make_pair(std::llround(strike * 100.0), expiry);
          if (!listed.insert(key).second) continue;
          contracts.push_back({detail::make_option_id(is_call, strike, expiry), is_call, strike,
                               day, expiry});
        }
      }
    }
  }
  return contracts;
}

/// Fills one observation day of a contract: given (day, spot, strike, days to
/// expiry, is_call), returns price, implied vol, Greeks, rate and forecast
/// variance. Throwing aborts the contract.
using StepPricer =
    std::function<EpisodeStep(long day, double spot, double strike, long tau, bool is_call)>;

struct ChainBuildResult {
  std::vector<OptionEpisode> episodes;
  std::vector<std::string> diagnostics;
};

/// Prices every listed contract along the path. The expiry step is always the
/// exercise value.
inline ChainBuildResult build_chain(const PricePath& path, const TradingCalendar& calendar,
                                    const StepPricer& pricer, const ListingRules& rules = {},
                                    bool is_call = true) {
  const auto contracts = list_contracts(path.prices, calendar, rules, is_call);
  ChainBuildResult result;
  result.episodes.reserve(contracts.size());
  for (const auto& contract : contracts) {
    OptionEpisode episode;
    episode.contract = contract;
    episode.today = contract.list_date;
    bool ok = true;
    for (long day = contract.list_date; day <= contract.expiry_date; ++day) {
      const double spot = path.prices[static_cast<std::size_t>(day)];
      const long tau = contract.expiry_date - day;
      if (tau == 0) {
        EpisodeStep step;
        step.date = day;
        step.underlying = spot;
        step.option_price = is_call ? std::max(spot - contract.strike, 0.0)
                                    : std::max(contract.strike - spot, 0.0);
        episode.steps.push_back(step);
        break;
      }
      try {
        EpisodeStep step = pricer(day, spot, contract.strike, tau, is_call);
        step.date = day;
        step.underlying = spot;
        episode.steps.push_back(step);
      } catch (const std::exception& e) {
        result.diagnostics.push_back("contract " + contract.option_id + " aborted at day " +
                                     std::to_string(day) + ": " + e.what());
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    episode.payoff = episode.steps.back().option_price;
    result.episodes.push_back(std::move(episode));
  }
  return result;
}

/// One episode per observation day strictly before expiry, sharing the
/// contract and truncating leading history.
inline std::vector<OptionEpisode> extract_subpaths(const OptionEpisode& record) {
  if (record.steps.size() < 2) throw InvalidInput("extract_subpaths: record needs at least 2 days");
  std::vector<OptionEpisode> episodes;
  episodes.reserve(record.steps.size() - 1);
  for (std::size_t i = 0; i + 1 < record.steps.size(); ++i) {
    OptionEpisode ep;
    ep.contract = record.contract;
    ep.today = record.steps[i].date;
    ep.steps.assign(record.steps.begin() + static_cast<std::ptrdiff_t>(i), record.steps.end());
    ep.payoff = record.payoff;
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

struct DatasetSplit {
  std::vector<OptionEpisode> train;
  std::vector<OptionEpisode> validation;
  std::vector<OptionEpisode> test;
  std::size_t dropped = 0;
};

/// Chronological split. Train: expire before split_1. Validation: start on or
/// after split_1 and expire before split_2. Test: start on or after split_2
/// and expire before split_3. Episodes crossing a boundary are dropped.
inline DatasetSplit split_dataset(std::vector<OptionEpisode> episodes, long split_1, long split_2,
                                  long split_3) {
  if (!(split_1 < split_2 && split_2 < split_3)) {
    throw InvalidInput("split_dataset: split dates must be strictly increasing");
  }
  DatasetSplit out;
  for (auto& ep : episodes) {
    const long start = ep.today;
    const long expiry = ep.contract.expiry_date;
    if (expiry < split_1) {
      out.train.push_back(std::move(ep));
    } else if (start >= split_1 && expiry < split_2) {
      out.validation.push_back(std::move(ep));
    } else if (start >= split_2 && expiry < split_3) {
      out.test.push_back(std::move(ep));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

}  // namespace tailhedge
