#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "tailhedge/chain.hpp"
#include "tailhedge/errors.hpp"

namespace tailhedge {

inline double wealth(double cash, double position, double price, double option_price) {
  return cash + position * price - option_price;
}

struct CostSpec {
  double proportional_rate = 0.0;

  void validate() const {
    if (proportional_rate < 0.0) throw InvalidInput("CostSpec: rate must be non-negative");
  }
};

inline double transaction_cost(double price, double position, double action, double rate) {
  return rate * std::abs(action - position) * price;
}

enum class RewardVariant { asymmetric, zero, asymmetric_margin, zero_margin };

inline const char* to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::asymmetric: return "asymmetric";
    case RewardVariant::zero: return "zero";
    case RewardVariant::asymmetric_margin: return "asymmetric-margin";
    case RewardVariant::zero_margin: return "zero-margin";
  }
  return "?";
}

struct RewardSpec {
  RewardVariant variant = RewardVariant::asymmetric;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double alpha = 0.975;

  bool margin_scaled() const {
    return variant == RewardVariant::asymmetric_margin || variant == RewardVariant::zero_margin;
  }
  bool zero_intermediate() const {
    return variant == RewardVariant::zero || variant == RewardVariant::zero_margin;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("RewardSpec: alpha must be in (0,1)");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw InvalidInput("RewardSpec: weights must be >= 0");
  }
};

/// Exchange initial margin for an uncovered writer: proceeds plus 15% of the
/// underlying less the out-of-the-money amount, floored at proceeds plus 10%.
inline double margin_initial(double option_proceeds, double s0, double strike, bool is_call) {
  if (option_proceeds <= 0.0 || s0 <= 0.0 || strike <= 0.0) {
    throw InvalidInput("margin_initial: inputs must be positive");
  }
  const double otm = is_call ? std::max(strike - s0, 0.0) : std::max(s0 - strike, 0.0);
  return std::max(option_proceeds + 0.15 * s0 - otm, option_proceeds + 0.10 * s0);
}

/// Reward before the final period: penalizes negative interim hedging wealth,
/// nothing else.
inline double intermediate_reward(double wealth_next, const RewardSpec& spec, double margin = 1.0) {
  if (spec.zero_intermediate()) return 0.0;
  const double scaled = spec.margin_scaled() ? wealth_next / margin : wealth_next;
  return scaled < 0.0 ? -std::abs(scaled) : 0.0;
}

/// Reward at expiry: a weighted sum of the sample CVaR bracket (at the current
/// VaR estimate omega) and the final P&L itself.
inline double terminal_reward(double final_pnl, double omega, const RewardSpec& spec,
                              double margin = 1.0) {
  spec.validate();
  const double w = spec.margin_scaled() ? final_pnl / margin : final_pnl;
  const double bracket = omega + std::max(-w - omega, 0.0) / (1.0 - spec.alpha);
  return -spec.lambda1 * bracket + spec.lambda2 * w;
}

/// The dealer's observable state right before rebalancing. The first five
/// fields are the core state; the rest condition a contract-unified policy
/// (strike over initial underlying, interim wealth, rate and Greeks).
struct HedgeState {
  double cash = 0.0;
  double position = 0.0;
  double price = 0.0;
  double vol = 0.0;
  double tau = 0.0;
  double moneyness = 0.0;
  double wealth = 0.0;
  double rate = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  double vega = 0.0;
  double theta = 0.0;
  double option_price = 0.0;  // quote backing the wealth field
};

enum class StateLayout { contract_specific, contract_unified };

inline constexpr std::size_t state_dim(StateLayout layout) {
  return layout == StateLayout::contract_specific ? 5 : 12;
}

inline void featurize(const HedgeState& s, StateLayout layout, std::vector<double>& out) {
  out.clear();
  out.insert(out.end(), {s.cash, s.position, s.price, s.vol, s.tau});
  if (layout == StateLayout::contract_unified) {
    out.insert(out.end(),
               {s.moneyness, s.wealth, s.rate, s.delta, s.gamma, s.vega, s.theta});
  }
}

namespace detail {

inline HedgeState make_state(const OptionEpisode& episode, std::size_t t, double cash,
                             double position) {
  const EpisodeStep& obs = episode.steps[t];
  HedgeState s;
  s.cash = cash;
  s.position = position;
  s.price = obs.underlying;
  s.vol = obs.implied_vol;
  s.tau = static_cast<double>(episode.steps.size() - 1 - t);
  s.moneyness = episode.contract.strike / episode.steps.front().underlying;
  s.option_price = t + 1 == episode.steps.size() ? episode.payoff : obs.option_price;
  s.wealth = wealth(cash, position, s.price, s.option_price);
  s.rate = obs.rate;
  s.delta = obs.delta;
  s.gamma = obs.gamma;
  s.vega = obs.vega;
  s.theta = obs.theta;
  return s;
}

}  // namespace detail

inline constexpr double kPositionBound = 1.0;

/// One environment transition: trade to the new position at the current
/// price, pay costs, accrue one day of interest, then observe the next day.
inline HedgeState step(const HedgeState& state, double action, const OptionEpisode& episode,
                       std::size_t next_t, const CostSpec& cost, double rate) {
  if (!std::isfinite(action)) throw InvalidInput("step: action must be finite");
  if (std::abs(action) > kPositionBound + 1e-12) {
    throw InvalidInput("step: action outside the position bound");
  }
  if (next_t >= episode.steps.size()) throw InvalidInput("step: episode exhausted");
  const double traded = (action - state.position) * state.price;
  const double fee = transaction_cost(state.price, state.position, action, cost.proportional_rate);
  const double next_cash = (state.cash - traded - fee) * std::exp(rate);
  return detail::make_state(episode, next_t, next_cash, action);
}

/// The action source for a rollout: returns the position to hold, plus the
/// raw (pre-truncation) draw and its log-density when the source is a
/// stochastic policy. Deterministic hedgers leave raw == applied and a zero
/// log-density.
struct ActionDraw {
  double applied = 0.0;
  double raw = 0.0;
  double log_density = 0.0;
};

using ActionSource = std::function<ActionDraw(const HedgeState&, std::size_t t)>;

/// The record of one hedging episode under one policy.
struct Trajectory {
  std::vector<HedgeState> states;   // s_0 .. s_{T-1}
  std::vector<double> actions;      // applied positions
  std::vector<double> raw_actions;  // pre-truncation draws
  std::vector<double> log_densities;
  std::vector<double> rewards;  // R_1 .. R_{T-1}; the trainer owns R_T
  double final_pnl = 0.0;
  double margin = 1.0;
  std::size_t horizon = 0;
};

/// Runs an episode start to expiry. Interim rewards follow the reward spec;
/// the terminal reward is not filled here because it depends on the VaR
/// estimate owned by the trainer.
inline Trajectory rollout(const OptionEpisode& episode, const ActionSource& act,
                          const CostSpec& cost, const RewardSpec& spec) {
  spec.validate();
  cost.validate();
  const std::size_t horizon = episode.n_hedge_steps();
  if (horizon < 1) throw InvalidInput("rollout: episode has no hedging step");
  Trajectory traj;
  traj.horizon = horizon;
  traj.margin = spec.margin_scaled()
                    ? margin_initial(episode.steps.front().option_price,
                                     episode.steps.front().underlying, episode.contract.strike,
                                     episode.contract.is_call)
                    : 1.0;
  traj.states.reserve(horizon);
  traj.actions.reserve(horizon);

  // the seller starts with the option proceeds in cash and no stock
  HedgeState state = detail::make_state(episode, 0, episode.steps.front().option_price, 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    const ActionDraw draw = act(state, t);
    traj.states.push_back(state);
    traj.actions.push_back(draw.applied);
    traj.raw_actions.push_back(draw.raw);
    traj.log_densities.push_back(draw.log_density);
    state = step(state, draw.applied, episode, t + 1, cost, episode.steps[t].rate);
    if (t + 1 < horizon) {
      traj.rewards.push_back(intermediate_reward(state.wealth, spec, traj.margin));
    }
  }
  traj.final_pnl = state.wealth;  // settles against the exercise value
  return traj;
}

/// Columnar debug dump: trajectory_id, step, state fields, action, reward.
inline void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                                   std::ostream& out) {
  out << "trajectory_id,step,cash,position,price,vol,tau,moneyness,wealth,rate,action,reward\n";
  char buf[400];
  for (std::size_t id = 0; id < trajectories.size(); ++id) {
    const auto& traj = trajectories[id];
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      const auto& s = traj.states[t];
      const double reward = t + 1 <= traj.rewards.size() ? traj.rewards[t] : 0.0;
      std::snprintf(buf, sizeof(buf),
                    "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", id, t,
                    s.cash, s.position, s.price, s.vol, s.tau, s.moneyness, s.wealth, s.rate,
                    traj.actions[t], reward);
      out << buf;
    }
  }
}

}  // namespace tailhedge
