#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tailhedge/env.hpp"
#include "tailhedge/errors.hpp"
#include "tailhedge/parallel.hpp"
#include "tailhedge/policy.hpp"
#include "tailhedge/ppo.hpp"
#include "tailhedge/risk.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

/// Produces the episode for rollout `index` of epoch `epoch`. Implementations
/// must be deterministic in (epoch, index).
using EpisodeFactory = std::function<OptionEpisode(std::size_t epoch, std::size_t index)>;

/// Teacher hedge ratio used to pre-train an initializer.
using TeacherFn = std::function<double(const OptionEpisode&, const HedgeState&, std::size_t t)>;

struct BufferTuple {
  std::vector<double> state;  // normalized at collection time
  double raw_action = 0.0;
  double logp_old = 0.0;
  double target = 0.0;     // rewards-to-go
  double advantage = 0.0;  // generalized advantage estimate
};

struct PnlSample {
  std::vector<double> initial_state;  // normalized
  double final_pnl = 0.0;             // margin-scaled when the reward variant is
};

struct LearningCurvePoint {
  std::size_t epoch = 0;
  double cumulative_reward = 0.0;
  double value_loss = 0.0;
  double var_loss = 0.0;
};

namespace detail {

struct MinibatchGrads {
  DenseNet::Gradients policy;  // ascent direction: grad of mean surrogate - c0 * entropy loss
  double log_variance = 0.0;   // same direction, for the free variance parameter
  DenseNet::Gradients value;   // grad of the mean squared value error (descent applies -c1)
  double surrogate_mean = 0.0;
  double value_loss_mean = 0.0;
  double joint_norm = 0.0;  // norm of the capped update direction
};

/// Gradients of the combined objective over one minibatch. Matches the
/// parameter-update rules: the policy ascends the clipped surrogate (and
/// descends the entropy loss with weight c0), the value network descends its
/// squared error with weight c1; one joint L2 norm caps both.
inline MinibatchGrads compute_minibatch_grads(AgentBundle& agent,
                                              std::span<const BufferTuple> batch,
                                              const TrainConfig& config) {
  if (batch.empty()) throw InvalidInput("compute_minibatch_grads: empty batch");
  const std::size_t n = batch.size();
  const std::size_t dim = batch.front().state.size();
  Matrix inputs(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(batch[i].state.begin(), batch[i].state.end(), inputs.data.begin() + i * dim);
  }

  DenseNet::ForwardCache policy_cache, value_cache;
  const Matrix mu = agent.policy.mean_net.forward(inputs, /*train=*/true, &policy_cache);
  const Matrix v = agent.value_net.forward(inputs, /*train=*/true, &value_cache);

  MinibatchGrads out;
  out.policy = agent.policy.mean_net.make_gradients();
  out.value = agent.value_net.make_gradients();

  const double variance = agent.policy.variance();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_mu(n, 1), d_v(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const BufferTuple& tuple = batch[i];
    const double mean_i = mu.at(i, 0);
    const double logp_new = gaussian_log_density(tuple.raw_action, mean_i, variance);
    const double ratio = std::exp(logp_new - tuple.logp_old);
    out.surrogate_mean += clipped_surrogate(ratio, tuple.advantage, config.clip_eps) * inv_n;
    if (surrogate_ratio_active(ratio, tuple.advantage, config.clip_eps)) {
      const double d_logp = ratio * tuple.advantage * inv_n;
      const double centered = tuple.raw_action - mean_i;
      d_mu.at(i, 0) = d_logp * centered / variance;
      out.log_variance += d_logp * (-0.5 + 0.5 * centered * centered / variance);
    }
    const double err = v.at(i, 0) - tuple.target;
    out.value_loss_mean += err * err * inv_n;
    d_v.at(i, 0) = 2.0 * err * inv_n;
  }
  // descending the entropy loss raises the variance; d(entropy loss)/d(logvar) = -1/2
  out.log_variance += 0.5 * config.c0;

  agent.policy.mean_net.backward(policy_cache, d_mu, out.policy);
  agent.value_net.backward(value_cache, d_v, out.value);

  const double sq = out.policy.squared_norm() + out.log_variance * out.log_variance +
                    config.c1 * config.c1 * out.value.squared_norm();
  out.joint_norm = std::sqrt(sq);
  if (!std::isfinite(out.joint_norm)) {
    throw NumericError("minibatch gradient is not finite");
  }
  return out;
}

/// Mean pinball loss of the current VaR estimate over the P&L buffer.
inline double var_loss_mean(AgentBundle& agent, std::span<const PnlSample> buffer, double alpha) {
  double loss = 0.0;
  for (const auto& sample : buffer) {
    loss += pinball_loss(agent.var_head.value(sample.initial_state), sample.final_pnl, alpha);
  }
  return loss / static_cast<double>(buffer.size());
}

/// One capped SGD step of the VaR estimate on the full P&L buffer.
inline void update_var_head(AgentBundle& agent, std::span<const PnlSample> buffer, double alpha,
                            double lr, const TrainConfig& config) {
  if (buffer.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(buffer.size());
  if (agent.var_head.mode == VarHead::Mode::scalar) {
    double grad = 0.0;
    for (const auto& sample : buffer) {
      grad += pinball_derivative(agent.var_head.omega, sample.final_pnl, alpha) * inv_n;
    }
    const double capped_norm = config.c2 * std::abs(grad);
    const double coeff = clip_coefficient(capped_norm, config.max_grad_norm);
    agent.var_head.omega -= config.c2 * lr * grad * coeff;
    return;
  }
  const std::size_t dim = buffer.front().initial_state.size();
  Matrix inputs(buffer.size(), dim);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    std::copy(buffer[i].initial_state.begin(), buffer[i].initial_state.end(),
              inputs.data.begin() + i * dim);
  }
  DenseNet::ForwardCache cache;
  const Matrix omega = agent.var_head.net.forward(inputs, /*train=*/true, &cache);
  Matrix d_omega(buffer.size(), 1);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    d_omega.at(i, 0) = pinball_derivative(omega.at(i, 0), buffer[i].final_pnl, alpha) * inv_n;
  }
  auto grads = agent.var_head.net.make_gradients();
  agent.var_head.net.backward(cache, d_omega, grads);
  const double capped_norm = config.c2 * std::sqrt(grads.squared_norm());
  if (!std::isfinite(capped_norm)) throw NumericError("VaR-network gradient is not finite");
  const double coeff = clip_coefficient(capped_norm, config.max_grad_norm);
  agent.var_head.net.apply_update(grads, -config.c2 * lr * coeff);
}

struct CollectedTrajectory {
  Trajectory traj;
  std::vector<std::vector<double>> raw_states;
  std::vector<std::vector<double>> norm_states;
};

inline CollectedTrajectory collect_trajectory(AgentBundle& agent, const OptionEpisode& episode,
                                              const RewardSpec& spec, const CostSpec& cost,
                                              const RunningNormalizer& frozen, Rng rng) {
  CollectedTrajectory out;
  std::vector<double> features;
  ActionSource source = [&](const HedgeState& state, std::size_t) {
    featurize(state, agent.layout, features);
    out.raw_states.push_back(features);
    std::vector<double> normalized;
    frozen.normalize_into(features, normalized);
    const PolicySample sample = sample_action(agent.policy, normalized, rng);
    out.norm_states.push_back(std::move(normalized));
    return ActionDraw{sample.applied, sample.raw, sample.log_density};
  };
  out.traj = rollout(episode, source, cost, spec);
  return out;
}

}  // namespace detail

struct TrainHooks {
  /// Called after each epoch with the live agent and the curve history.
  std::function<void(std::size_t epoch, const AgentBundle&,
                     const std::vector<LearningCurvePoint>&)>
      on_epoch;
};

struct TrainResult {
  std::vector<LearningCurvePoint> curves;
};

namespace detail {

inline TrainResult train_loop(AgentBundle& agent, const EpisodeFactory& factory,
                              const RewardSpec& spec, const CostSpec& cost,
                              const TrainConfig& config, std::size_t first_epoch,
                              const TrainHooks& hooks) {
  config.validate();
  spec.validate();
  cost.validate();
  TrainResult result;
  const Rng root(Rng::derive_key(config.seed, 0x747261696eull));  // "train"

  for (std::size_t epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);

    // Rollouts see a frozen snapshot of the normalizer so results do not
    // depend on how collection is sharded across workers.
    const RunningNormalizer frozen = agent.normalizer;
    std::size_t n_rollouts = config.rollouts;
    if (n_rollouts == 0) {
      const std::size_t horizon = std::max<std::size_t>(1, factory(epoch, 0).n_hedge_steps());
      n_rollouts = std::max<std::size_t>(1, (config.buffer + horizon - 1) / horizon);
    }

    std::vector<detail::CollectedTrajectory> collected(n_rollouts);
    parallel_for(n_rollouts, config.threads, [&](std::size_t i) {
      const OptionEpisode episode = factory(epoch, i);
      collected[i] = detail::collect_trajectory(agent, episode, spec, cost, frozen,
                                                root.substream(0x726f6cull, epoch, i));
    });

    std::vector<BufferTuple> tuples;
    std::vector<PnlSample> pnl_buffer;
    pnl_buffer.reserve(n_rollouts);
    double reward_sum = 0.0;
    double advantage_sq_sum = 0.0;
    std::size_t tuple_count = 0;

    for (auto& item : collected) {
      for (const auto& raw : item.raw_states) agent.normalizer.observe(raw);

      const std::size_t horizon = item.traj.horizon;
      Matrix inputs(horizon, item.norm_states.front().size());
      for (std::size_t t = 0; t < horizon; ++t) {
        std::copy(item.norm_states[t].begin(), item.norm_states[t].end(),
                  inputs.data.begin() + t * inputs.cols);
      }
      const Matrix value_out = agent.value_net.forward(inputs, /*train=*/false);
      std::vector<double> values(horizon);
      for (std::size_t t = 0; t < horizon; ++t) values[t] = value_out.at(t, 0);

      const double scaled_pnl = item.traj.final_pnl / item.traj.margin;
      const double omega = agent.var_head.value(item.norm_states.front());
      std::vector<double> rewards = item.traj.rewards;
      rewards.push_back(terminal_reward(item.traj.final_pnl, omega, spec, item.traj.margin));

      const auto advantages = gae(rewards, values, config.gamma, config.lambda_gae);
      const auto targets = rewards_to_go(advantages, values);

      for (double r : rewards) reward_sum += r;
      for (std::size_t t = 0; t < horizon; ++t) {
        BufferTuple tuple;
        tuple.state = std::move(item.norm_states[t]);
        tuple.raw_action = item.traj.raw_actions[t];
        tuple.logp_old = item.traj.log_densities[t];
        tuple.target = targets[t];
        tuple.advantage = advantages[t];
        advantage_sq_sum += advantages[t] * advantages[t];
        tuples.push_back(std::move(tuple));
        ++tuple_count;
      }
      pnl_buffer.push_back({tuples[tuples.size() - horizon].state, scaled_pnl});
    }

    LearningCurvePoint point;
    point.epoch = epoch;
    point.cumulative_reward = reward_sum / static_cast<double>(n_rollouts);
    point.value_loss = advantage_sq_sum / static_cast<double>(tuple_count);
    point.var_loss = detail::var_loss_mean(agent, pnl_buffer, spec.alpha);
    if (!std::isfinite(point.cumulative_reward) || !std::isfinite(point.value_loss) ||
        !std::isfinite(point.var_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    }

    std::vector<std::size_t> order(tuples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t pass = 0; pass < config.passes; ++pass) {
      Rng shuffle_rng = root.substream(0x73687566ull, epoch, pass);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);
      }
      const std::size_t n_batches = tuples.size() / config.minibatch;
      std::vector<BufferTuple> batch(config.minibatch);
      for (std::size_t b = 0; b < n_batches; ++b) {
        for (std::size_t j = 0; j < config.minibatch; ++j) {
          batch[j] = tuples[order[b * config.minibatch + j]];
        }
        const auto grads = detail::compute_minibatch_grads(agent, batch, config);
        const double coeff = clip_coefficient(grads.joint_norm, config.max_grad_norm);
        agent.policy.mean_net.apply_update(grads.policy, lr * coeff);
        agent.policy.log_variance += lr * coeff * grads.log_variance;
        agent.value_net.apply_update(grads.value, -config.c1 * lr * coeff);
      }
      detail::update_var_head(agent, pnl_buffer, spec.alpha, lr, config);
    }

    result.curves.push_back(point);
    if (hooks.on_epoch) hooks.on_epoch(epoch, agent, result.curves);
  }
  return result;
}

}  // namespace detail

/// Trains a hedger for one fixed contract: scalar VaR estimate, every episode
/// drawn from the same initial state.
inline TrainResult train_cs(AgentBundle& agent, const EpisodeFactory& factory,
                            const RewardSpec& spec, const CostSpec& cost,
                            const TrainConfig& config, std::size_t first_epoch = 0,
                            const TrainHooks& hooks = {}) {
  if (agent.var_head.mode != VarHead::Mode::scalar) {
    throw InvalidInput("train_cs: needs a scalar VaR estimate");
  }
  if (agent.layout != StateLayout::contract_specific) {
    throw InvalidInput("train_cs: needs the contract-specific state layout");
  }
  return detail::train_loop(agent, factory, spec, cost, config, first_epoch, hooks);
}

/// Trains one hedger across contracts: the VaR of the final P&L is a network
/// over the (extended) initial state.
inline TrainResult train_cu(AgentBundle& agent, const EpisodeFactory& sampler,
                            const RewardSpec& spec, const CostSpec& cost,
                            const TrainConfig& config, std::size_t first_epoch = 0,
                            const TrainHooks& hooks = {}) {
  if (agent.var_head.mode != VarHead::Mode::network) {
    throw InvalidInput("train_cu: needs a VaR network");
  }
  if (agent.layout != StateLayout::contract_unified) {
    throw InvalidInput("train_cu: needs the contract-unified state layout");
  }
  return detail::train_loop(agent, sampler, spec, cost, config, first_epoch, hooks);
}

/// Final P&L of the agent on a fixed set of episodes. Deterministic mean
/// actions by default; stochastic evaluation draws from the policy.
inline std::vector<double> agent_pnl(AgentBundle& agent, const std::vector<OptionEpisode>& episodes,
                                     const CostSpec& cost, bool stochastic = false,
                                     std::uint64_t seed = 0, unsigned threads = 1) {
  std::vector<double> pnl(episodes.size());
  const RewardSpec spec;  // reward content is irrelevant for the P&L
  const Rng root(Rng::derive_key(seed, 0x6576616cull));  // "eval"
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    Rng rng = root.substream(i);
    std::vector<double> features, normalized;
    ActionSource source = [&](const HedgeState& state, std::size_t) {
      featurize(state, agent.layout, features);
      agent.normalizer.normalize_into(features, normalized);
      if (stochastic) {
        const PolicySample sample = sample_action(agent.policy, normalized, rng);
        return ActionDraw{sample.applied, sample.raw, sample.log_density};
      }
      const double mean = agent.policy.mean(normalized);
      const double applied = std::clamp(mean, -agent.policy.bound, agent.policy.bound);
      return ActionDraw{applied, mean, 0.0};
    };
    pnl[i] = rollout(episodes[i], source, cost, spec).final_pnl;
  });
  return pnl;
}

struct PretrainConfig {
  std::size_t rollouts = 1000;  // teacher episodes collected once
  std::size_t epochs = 200;    // supervised passes
  std::size_t minibatch = 1024;
  double lr = 1e-2;
  double gamma = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Supervised warm start: the policy net is fit to a teacher hedge ratio,
/// the value net to Monte Carlo returns of teacher rollouts, and the VaR
/// estimate to the quantile of teacher final P&L. Always runs in the
/// zero-cost environment.
inline void pretrain_initializer(AgentBundle& agent, const std::vector<OptionEpisode>& episodes,
                                 const TeacherFn& teacher, const RewardSpec& spec,
                                 const PretrainConfig& config) {
  if (episodes.empty()) throw InvalidInput("pretrain_initializer: no episodes");
  spec.validate();
  const CostSpec no_cost{0.0};
  const std::size_t n = std::min(config.rollouts, episodes.size()) == 0
                            ? episodes.size()
                            : std::min(config.rollouts, episodes.size());

  struct TeacherTraj {
    Trajectory traj;
    std::vector<std::vector<double>> raw_states;
  };
  std::vector<TeacherTraj> collected(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const OptionEpisode& episode = episodes[i];
    auto& out = collected[i];
    std::vector<double> features;
    ActionSource source = [&](const HedgeState& state, std::size_t t) {
      featurize(state, agent.layout, features);
      out.raw_states.push_back(features);
      const double a =
          std::clamp(teacher(episode, state, t), -agent.policy.bound, agent.policy.bound);
      return ActionDraw{a, a, 0.0};
    };
    out.traj = rollout(episode, source, no_cost, spec);
  });

  for (const auto& item : collected) {
    for (const auto& raw : item.raw_states) agent.normalizer.observe(raw);
  }

  // the VaR estimate is fit first so reward targets can use it
  std::vector<PnlSample> pnl_buffer;
  std::vector<double> scaled_pnl;
  for (const auto& item : collected) {
    std::vector<double> normalized;
    agent.normalizer.normalize_into(item.raw_states.front(), normalized);
    const double w = item.traj.final_pnl / item.traj.margin;
    pnl_buffer.push_back({std::move(normalized), w});
    scaled_pnl.push_back(w);
  }
  if (agent.var_head.mode == VarHead::Mode::scalar) {
    // exact minimizer of the mean pinball loss
    agent.var_head.omega = empirical_var(scaled_pnl, spec.alpha);
  }

  struct Example {
    std::vector<double> state;
    double action = 0.0;
    double value = 0.0;
  };
  std::vector<Example> examples;
  for (const auto& item : collected) {
    // suffix sums of discounted rewards, terminal reward included
    const double omega_hat =
        agent.var_head.mode == VarHead::Mode::scalar
            ? agent.var_head.omega
            : empirical_var(scaled_pnl, spec.alpha);  // network refined below
    std::vector<double> rewards = item.traj.rewards;
    rewards.push_back(terminal_reward(item.traj.final_pnl, omega_hat, spec, item.traj.margin));
    std::vector<double> suffix(rewards.size() + 1, 0.0);
    for (std::size_t t = rewards.size(); t-- > 0;) {
      suffix[t] = rewards[t] + config.gamma * suffix[t + 1];
    }
    for (std::size_t t = 0; t < item.traj.horizon; ++t) {
      Example ex;
      agent.normalizer.normalize_into(item.raw_states[t], ex.state);
      ex.action = item.traj.actions[t];
      ex.value = suffix[t];
      examples.push_back(std::move(ex));
    }
  }

  const Rng root(Rng::derive_key(config.seed, 0x70726574ull));  // "pret"
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch_size = std::min(config.minibatch, examples.size());
  const std::size_t dim = examples.front().state.size();
  Matrix inputs(batch_size, dim);
  Matrix d_out(batch_size, 1);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.substream(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);
    }
    const std::size_t n_batches = examples.size() / batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      for (std::size_t j = 0; j < batch_size; ++j) {
        const Example& ex = examples[order[b * batch_size + j]];
        std::copy(ex.state.begin(), ex.state.end(), inputs.data.begin() + j * dim);
      }
      const double inv = 1.0 / static_cast<double>(batch_size);

      DenseNet::ForwardCache cache;
      Matrix out = agent.policy.mean_net.forward(inputs, /*train=*/true, &cache);
      for (std::size_t j = 0; j < batch_size; ++j) {
        const double target = examples[order[b * batch_size + j]].action;
        d_out.at(j, 0) = 2.0 * (out.at(j, 0) - target) * inv;
      }
      auto grads = agent.policy.mean_net.make_gradients();
      agent.policy.mean_net.backward(cache, d_out, grads);
      agent.policy.mean_net.apply_update(grads, -config.lr);

      out = agent.value_net.forward(inputs, /*train=*/true, &cache);
      for (std::size_t j = 0; j < batch_size; ++j) {
        const double target = examples[order[b * batch_size + j]].value;
        d_out.at(j, 0) = 2.0 * (out.at(j, 0) - target) * inv;
      }
      grads = agent.value_net.make_gradients();
      agent.value_net.backward(cache, d_out, grads);
      agent.value_net.apply_update(grads, -config.lr);
    }

    if (agent.var_head.mode == VarHead::Mode::network) {
      Matrix s0(pnl_buffer.size(), dim);
      for (std::size_t i = 0; i < pnl_buffer.size(); ++i) {
        std::copy(pnl_buffer[i].initial_state.begin(), pnl_buffer[i].initial_state.end(),
                  s0.data.begin() + i * dim);
      }
      DenseNet::ForwardCache cache;
      const Matrix omega = agent.var_head.net.forward(s0, /*train=*/true, &cache);
      Matrix d_omega(pnl_buffer.size(), 1);
      const double inv = 1.0 / static_cast<double>(pnl_buffer.size());
      for (std::size_t i = 0; i < pnl_buffer.size(); ++i) {
        d_omega.at(i, 0) =
            pinball_derivative(omega.at(i, 0), pnl_buffer[i].final_pnl, spec.alpha) * inv;
      }
      auto grads = agent.var_head.net.make_gradients();
      agent.var_head.net.backward(cache, d_omega, grads);
      agent.var_head.net.apply_update(grads, -config.lr);
    }
  }
}

}  // namespace tailhedge
