#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tailhedge/env.hpp"
#include "tailhedge/errors.hpp"
#include "tailhedge/nets.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

/// Per-dimension running moments (Welford). Population variance with a 1e-8
/// floor under the square root.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  std::size_t dim() const { return mean_.size(); }
  std::uint64_t count() const { return count_; }

  void observe(std::span<const double> x) {
    if (x.size() != mean_.size()) throw InvalidInput("RunningNormalizer: dimension mismatch");
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(count_);
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }

  double mean_at(std::size_t i) const { return mean_[i]; }
  double var_at(std::size_t i) const {
    return count_ == 0 ? 1.0 : m2_[i] / static_cast<double>(count_);
  }

  void normalize_into(std::span<const double> x, std::vector<double>& out) const {
    if (x.size() != mean_.size()) throw InvalidInput("RunningNormalizer: dimension mismatch");
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = (x[i] - mean_[i]) / std::sqrt(var_at(i) + 1e-8);
    }
  }

  // serialization access
  const std::vector<double>& mean_state() const { return mean_; }
  const std::vector<double>& m2_state() const { return m2_; }
  void set_state(std::vector<double> mean, std::vector<double> m2, std::uint64_t count) {
    mean_ = std::move(mean);
    m2_ = std::move(m2);
    count_ = count;
  }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::uint64_t count_ = 0;
};

/// (x - mean) / sqrt(var + floor); update mode folds x into the running
/// moments first, so the first observation normalizes to zero.
inline std::vector<double> normalize(std::span<const double> x, RunningNormalizer& normalizer,
                                     bool update) {
  if (update) normalizer.observe(x);
  std::vector<double> out;
  normalizer.normalize_into(x, out);
  return out;
}

inline double gaussian_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

/// Stochastic hedging policy: a state-dependent mean squashed into the
/// feasible delta range by the output head, plus a state-independent variance
/// stored as its log. Raw draws are truncated to [-bound, bound] before they
/// reach the environment, but densities are always evaluated on the raw draw.
struct GaussianPolicy {
  DenseNet mean_net;
  double log_variance = std::log(0.01);
  double bound = kPositionBound;

  double variance() const { return std::exp(log_variance); }

  /// Deterministic policy mean (eval-mode network) for one state vector.
  double mean(std::span<const double> state) {
    Matrix in(1, state.size());
    std::copy(state.begin(), state.end(), in.data.begin());
    return mean_net.forward(in, /*train=*/false).at(0, 0);
  }
};

struct PolicySample {
  double applied = 0.0;
  double raw = 0.0;
  double log_density = 0.0;
  double mean = 0.0;
};

inline PolicySample sample_action(GaussianPolicy& policy, std::span<const double> state,
                                  Rng& rng) {
  PolicySample out;
  out.mean = policy.mean(state);
  const double sd = std::sqrt(policy.variance());
  out.raw = out.mean + sd * rng.normal();
  out.applied = std::clamp(out.raw, -policy.bound, policy.bound);
  out.log_density = gaussian_log_density(out.raw, out.mean, policy.variance());
  return out;
}

/// Log-density of a (raw, pre-truncation) action under the current policy.
inline double policy_logdensity(GaussianPolicy& policy, std::span<const double> state,
                                double raw_action) {
  return gaussian_log_density(raw_action, policy.mean(state), policy.variance());
}

/// The VaR estimate attached to the terminal reward: a single trainable
/// scalar when hedging one fixed contract, or a network over the initial
/// state when one policy must serve many contracts.
struct VarHead {
  enum class Mode { scalar, network };
  Mode mode = Mode::scalar;
  double omega = 0.0;
  DenseNet net;  // linear output head

  double value(std::span<const double> initial_state) {
    if (mode == Mode::scalar) return omega;
    Matrix in(1, initial_state.size());
    std::copy(initial_state.begin(), initial_state.end(), in.data.begin());
    return net.forward(in, /*train=*/false).at(0, 0);
  }
};

/// Everything a trained hedger carries.
struct AgentBundle {
  StateLayout layout = StateLayout::contract_specific;
  bool is_call = true;
  GaussianPolicy policy;
  DenseNet value_net;
  VarHead var_head;
  RunningNormalizer normalizer;
};

struct AgentArch {
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 32;
  double log_variance_init = std::log(0.01);
};

inline AgentBundle make_agent(StateLayout layout, bool is_call, VarHead::Mode var_mode,
                              const AgentArch& arch, std::uint64_t seed) {
  AgentBundle agent;
  agent.layout = layout;
  agent.is_call = is_call;
  const std::size_t in_dim = state_dim(layout);
  std::vector<std::size_t> sizes{in_dim};
  for (std::size_t i = 0; i < arch.hidden_layers; ++i) sizes.push_back(arch.hidden_width);
  sizes.push_back(1);

  agent.policy.mean_net =
      DenseNet(sizes, is_call ? OutputHead::sigmoid : OutputHead::negated_sigmoid);
  agent.policy.log_variance = arch.log_variance_init;
  agent.value_net = DenseNet(sizes, OutputHead::linear);
  agent.var_head.mode = var_mode;
  agent.var_head.omega = 0.0;
  if (var_mode == VarHead::Mode::network) agent.var_head.net = DenseNet(sizes, OutputHead::linear);
  agent.normalizer = RunningNormalizer(in_dim);

  Rng rng(Rng::derive_key(seed, 0x696e6974ull));  // "init"
  agent.policy.mean_net.init(rng);
  agent.value_net.init(rng);
  if (var_mode == VarHead::Mode::network) agent.var_head.net.init(rng);
  return agent;
}

}  // namespace tailhedge
