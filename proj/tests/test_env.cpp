#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailhedge/black_scholes.hpp"
#include "tailhedge/env.hpp"
#include "tailhedge/gbm.hpp"
#include "tailhedge/rng.hpp"

using namespace tailhedge;

namespace {

OptionEpisode gbm_episode(double s0, double strike, std::size_t horizon, double sigma, double mu,
                          double r, std::uint64_t seed, bool is_call = true) {
  const auto paths = gbm_simulate({mu, sigma, r}, s0, horizon, 1, seed);
  OptionEpisode ep;
  ep.contract = {"T", is_call, strike, 0, static_cast<long>(horizon)};
  ep.today = 0;
  for (std::size_t t = 0; t <= horizon; ++t) {
    EpisodeStep step;
    step.date = static_cast<long>(t);
    step.underlying = paths[0].prices[t];
    const double tau = static_cast<double>(horizon - t);
    if (t < horizon) {
      step.option_price = bs_price(step.underlying, strike, tau, sigma, r, is_call);
      step.implied_vol = sigma;
      const Greeks g = bs_greeks(step.underlying, strike, tau, sigma, r, is_call);
      step.delta = g.delta;
      step.gamma = g.gamma;
      step.vega = g.vega;
      step.theta = g.theta;
    } else {
      step.option_price = is_call ? std::max(step.underlying - strike, 0.0)
                                  : std::max(strike - step.underlying, 0.0);
    }
    step.rate = r;
    ep.steps.push_back(step);
  }
  ep.payoff = ep.steps.back().option_price;
  return ep;
}

ActionSource constant_action(double a) {
  return [a](const HedgeState&, std::size_t) { return ActionDraw{a, a, 0.0}; };
}

}  // namespace

TEST_CASE("wealth and transaction cost arithmetic", "[env]") {
  CHECK(wealth(1.0, 0.0, 100.0, 1.0) == 0.0);
  CHECK(wealth(0.0, 1.0, 100.0, 100.0) == 0.0);
  CHECK(wealth(11.0, 0.5, 100.0, 3.7) == 57.3);

  CHECK(transaction_cost(100.0, 0.3, 0.3, 0.001) == 0.0);
  CHECK(transaction_cost(100.0, 0.0, 0.5, 0.001) == 0.05);
  CHECK(transaction_cost(100.0, 0.5, 0.0, 0.001) == transaction_cost(100.0, 0.0, 0.5, 0.001));
}

TEST_CASE("initial margin follows the uncovered-writer rule", "[env]") {
  CHECK(margin_initial(1.0, 100.0, 105.0, true) == 11.0);   // max(1+15-5, 1+10)
  CHECK(margin_initial(1.0, 100.0, 90.0, true) == 16.0);    // max(16, 11)
  CHECK(margin_initial(1.0, 100.0, 100.0, true) == 16.0);   // ATM: proceeds + 15%
  CHECK(margin_initial(1.0, 100.0, 110.0, false) == 16.0);  // ITM put
  CHECK(margin_initial(1.0, 100.0, 90.0, false) == 11.0);   // OTM put: floor binds
  CHECK_THROWS_AS(margin_initial(0.0, 100.0, 100.0, true), InvalidInput);
}

TEST_CASE("reward functions", "[env]") {
  RewardSpec asym{RewardVariant::asymmetric, 1.0, 0.0, 0.975};
  CHECK(intermediate_reward(-2.0, asym) == -2.0);
  CHECK(intermediate_reward(5.0, asym) == 0.0);
  RewardSpec zero{RewardVariant::zero, 1.0, 0.0, 0.975};
  CHECK(intermediate_reward(-2.0, zero) == 0.0);
  RewardSpec asym_margin{RewardVariant::asymmetric_margin, 1.0, 0.0, 0.975};
  CHECK_THAT(intermediate_reward(-2.0, asym_margin, 11.0),
             Catch::Matchers::WithinAbs(-2.0 / 11.0, 1e-15));

  // terminal: direct substitution
  CHECK_THAT(terminal_reward(-1.0, 0.0, asym), Catch::Matchers::WithinAbs(-40.0, 1e-12));
  // hinge inactive: -W <= omega
  RewardSpec both{RewardVariant::asymmetric, 0.7, 0.3, 0.975};
  const double w = 2.0, omega = 1.0;
  CHECK_THAT(terminal_reward(w, omega, both),
             Catch::Matchers::WithinAbs(-0.7 * omega + 0.3 * w, 1e-12));
  // margin variants with margin 1 equal the unscaled ones
  RewardSpec zm{RewardVariant::zero_margin, 1.0, 0.5, 0.9};
  RewardSpec zu{RewardVariant::zero, 1.0, 0.5, 0.9};
  CHECK(terminal_reward(-3.0, 0.2, zm, 1.0) == terminal_reward(-3.0, 0.2, zu));

  // monotone in the P&L for non-negative weights
  Rng rng(Rng::derive_key(31, 0));
  for (int i = 0; i < 200; ++i) {
    RewardSpec spec{RewardVariant::asymmetric, rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0),
                    rng.uniform(0.05, 0.99)};
    const double om = rng.uniform(-2.0, 2.0);
    const double w1 = rng.uniform(-5.0, 5.0);
    const double w2 = w1 + rng.uniform(0.0, 3.0);
    CHECK(terminal_reward(w2, om, spec) >= terminal_reward(w1, om, spec) - 1e-12);
  }

  // the averaged CVaR bracket at the empirical VaR recovers the empirical CVaR
  std::vector<double> pnl(400);
  for (auto& x : pnl) x = rng.normal() * 2.0;
  const double alpha = 0.9;
  const double var = [&] {
    std::vector<double> losses;
    for (double x : pnl) losses.push_back(-x);
    std::sort(losses.begin(), losses.end());
    return losses[static_cast<std::size_t>(std::ceil(alpha * losses.size())) - 1];
  }();
  RewardSpec unit{RewardVariant::asymmetric, 1.0, 0.0, alpha};
  double mean_bracket = 0.0;
  for (double x : pnl) mean_bracket += -terminal_reward(x, var, unit);
  mean_bracket /= static_cast<double>(pnl.size());
  // oracle: direct Rockafellar-Uryasev sample value
  double hinge = 0.0;
  for (double x : pnl) hinge += std::max(-x - var, 0.0);
  const double cvar = var + hinge / ((1.0 - alpha) * pnl.size());
  CHECK_THAT(mean_bracket, Catch::Matchers::WithinAbs(cvar, 1e-12));
}

TEST_CASE("step compounds cash and rejects bad actions", "[env]") {
  const auto ep = gbm_episode(100.0, 105.0, 5, 0.2 / std::sqrt(252.0), 0.0, 0.03 / 365.0, 3);
  HedgeState s0 = [&] {
    HedgeState s;
    s.cash = ep.steps[0].option_price;
    s.position = 0.0;
    s.price = ep.steps[0].underlying;
    return s;
  }();

  // no trade, no cost: cash grows by one day of interest
  const auto s1 = step(s0, 0.0, ep, 1, CostSpec{0.0}, 0.03 / 365.0);
  CHECK_THAT(s1.cash, Catch::Matchers::WithinRel(s0.cash * std::exp(0.03 / 365.0), 1e-15));
  CHECK(s1.position == 0.0);

  CHECK_THROWS_AS(step(s0, 1.5, ep, 1, CostSpec{}, 0.0), InvalidInput);
  CHECK_THROWS_AS(step(s0, std::nan(""), ep, 1, CostSpec{}, 0.0), InvalidInput);
  CHECK_THROWS_AS(step(s0, 0.5, ep, 99, CostSpec{}, 0.0), InvalidInput);
}

TEST_CASE("zero action, zero cost, zero rate telescopes to proceeds minus payoff", "[env]") {
  const auto ep = gbm_episode(100.0, 105.0, 30, 0.2 / std::sqrt(252.0), 0.1 / 252.0, 0.0, 11);
  const auto traj = rollout(ep, constant_action(0.0), CostSpec{0.0},
                            RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  CHECK_THAT(traj.final_pnl,
             Catch::Matchers::WithinAbs(ep.steps.front().option_price - ep.payoff, 1e-12));
  CHECK(traj.states.size() == 30);
  CHECK(traj.rewards.size() == 29);
}

TEST_CASE("one-step episode produces a single transition", "[env]") {
  const auto ep = gbm_episode(100.0, 100.0, 1, 0.2 / std::sqrt(252.0), 0.0, 0.0, 4);
  const auto traj = rollout(ep, constant_action(0.3), CostSpec{0.001},
                            RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  CHECK(traj.states.size() == 1);
  CHECK(traj.actions.size() == 1);
  CHECK(traj.rewards.empty());
  CHECK(traj.horizon == 1);
}

TEST_CASE("self-financing identity on random action sequences", "[env]") {
  Rng rng(Rng::derive_key(31, 5));
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t horizon = 2 + rng.uniform_below(28);
    const auto ep = gbm_episode(100.0, rng.uniform(80.0, 120.0), horizon,
                                rng.uniform(0.1, 0.4) / std::sqrt(252.0), 0.0, 0.0, 1000 + rep);
    std::vector<double> actions(horizon);
    for (auto& a : actions) a = rng.uniform(-1.0, 1.0);
    ActionSource src = [&actions](const HedgeState&, std::size_t t) {
      return ActionDraw{actions[t], actions[t], 0.0};
    };
    const auto traj = rollout(ep, src, CostSpec{0.0},
                              RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});

    const double w0 = wealth(ep.steps[0].option_price, 0.0, ep.steps[0].underlying,
                             ep.steps[0].option_price);
    double gains = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      gains += actions[t] * (ep.steps[t + 1].underlying - ep.steps[t].underlying);
    }
    const double z_change = ep.payoff - ep.steps[0].option_price;
    CHECK_THAT(traj.final_pnl - w0, Catch::Matchers::WithinAbs(gains - z_change, 1e-10));
  }
}

TEST_CASE("position bound holds along stochastic rollouts", "[env]") {
  const auto ep = gbm_episode(100.0, 100.0, 20, 0.2 / std::sqrt(252.0), 0.0, 0.0, 6);
  Rng rng(Rng::derive_key(31, 6));
  ActionSource noisy = [&rng](const HedgeState&, std::size_t) {
    const double raw = 2.0 * rng.normal();
    const double applied = std::clamp(raw, -1.0, 1.0);
    return ActionDraw{applied, raw, 0.0};
  };
  const auto traj = rollout(ep, noisy, CostSpec{0.001},
                            RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    CHECK(std::abs(traj.states[t].position) <= 1.0);
  }
  for (double a : traj.actions) CHECK(std::abs(a) <= 1.0);
}

TEST_CASE("seeded stochastic rollouts replay bit-identically", "[env]") {
  const auto ep = gbm_episode(100.0, 102.0, 15, 0.25 / std::sqrt(252.0), 0.0, 1e-4, 7);
  auto run = [&](std::uint64_t seed) {
    Rng rng(Rng::derive_key(seed, 99));
    ActionSource src = [&rng](const HedgeState&, std::size_t) {
      const double raw = 0.5 + 0.1 * rng.normal();
      return ActionDraw{std::clamp(raw, -1.0, 1.0), raw, 0.0};
    };
    return rollout(ep, src, CostSpec{0.001}, RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  };
  const auto a = run(5);
  const auto b = run(5);
  CHECK(a.final_pnl == b.final_pnl);
  CHECK(a.actions == b.actions);
  CHECK(a.rewards == b.rewards);
  const auto c = run(6);
  CHECK(a.actions != c.actions);
}

TEST_CASE("interest accrual over one step matches the daily rate", "[env]") {
  const double r = 0.03 / 365.0;
  const auto ep = gbm_episode(100.0, 105.0, 1, 0.2 / std::sqrt(252.0), 0.0, r, 8);
  const auto traj = rollout(ep, constant_action(0.0), CostSpec{0.0},
                            RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  const double b0 = ep.steps[0].option_price;
  CHECK_THAT(traj.final_pnl + ep.payoff, Catch::Matchers::WithinRel(b0 * std::exp(r), 1e-14));
}

TEST_CASE("trajectory dump is columnar", "[env]") {
  const auto ep = gbm_episode(100.0, 100.0, 3, 0.2 / std::sqrt(252.0), 0.0, 0.0, 12);
  const auto traj = rollout(ep, constant_action(0.5), CostSpec{0.0},
                            RewardSpec{RewardVariant::asymmetric, 1.0, 0.0, 0.975});
  std::ostringstream out;
  write_trajectories_csv({traj}, out);
  const std::string text = out.str();
  CHECK(text.find("trajectory_id,step,cash") == 0);
  // header + one row per state
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 1 + traj.states.size());
}
