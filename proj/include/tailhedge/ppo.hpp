#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tailhedge/errors.hpp"

namespace tailhedge {

/// Clipped policy surrogate: min(ratio * A, g(eps, A)) with
/// g = (1+eps)A for A >= 0 and (1-eps)A otherwise.
inline double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double g = advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
  return std::min(ratio * advantage, g);
}

/// Whether the ratio branch of the surrogate is active (its gradient flows).
/// Ties go to the ratio branch.
inline bool surrogate_ratio_active(double ratio, double advantage, double epsilon) {
  const double g = advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
  return ratio * advantage <= g;
}

/// Generalized advantage estimates by the backward recursion. rewards holds
/// R_1..R_T (the caller fills the terminal reward), values holds
/// V(s_0)..V(s_{T-1}); V(s_T) is zero.
inline std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                               double gamma, double lambda) {
  const std::size_t horizon = rewards.size();
  if (values.size() != horizon) throw InvalidInput("gae: rewards/values length mismatch");
  if (horizon == 0) throw InvalidInput("gae: empty trajectory");
  std::vector<double> advantages(horizon);
  advantages[horizon - 1] = rewards[horizon - 1] - values[horizon - 1];
  for (std::size_t t = horizon - 1; t-- > 0;) {
    const double td = rewards[t] + gamma * values[t + 1] - values[t];
    advantages[t] = gamma * lambda * advantages[t + 1] + td;
  }
  return advantages;
}

/// Rewards-to-go targets: G_t = A_t + V(s_t).
inline std::vector<double> rewards_to_go(std::span<const double> advantages,
                                         std::span<const double> values) {
  if (advantages.size() != values.size()) {
    throw InvalidInput("rewards_to_go: length mismatch");
  }
  std::vector<double> out(advantages.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = advantages[t] + values[t];
  return out;
}

inline double value_loss(double predicted, double target) {
  const double d = predicted - target;
  return d * d;
}

/// Quantile-regression loss whose minimizer over omega is the alpha-quantile
/// of the loss -final_pnl.
inline double pinball_loss(double omega, double final_pnl, double alpha) {
  const double loss = -final_pnl;
  if (loss >= omega) return alpha * std::abs(omega - loss);
  return (1.0 - alpha) * std::abs(omega - loss);
}

/// Subgradient of pinball_loss in omega (zero at the kink).
inline double pinball_derivative(double omega, double final_pnl, double alpha) {
  const double loss = -final_pnl;
  if (loss > omega) return -alpha;
  if (loss < omega) return 1.0 - alpha;
  return 0.0;
}

/// Negative differential entropy of the Gaussian policy; log_variance is the
/// log of the policy variance.
inline double entropy_loss(double log_variance) {
  return -(0.5 + 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * log_variance);
}

/// L2 gradient-cap coefficient: scale by min(max_norm / norm, 1).
inline double clip_coefficient(double norm, double max_norm) {
  if (norm <= max_norm || norm == 0.0) return 1.0;
  return max_norm / norm;
}

inline void clip_grad(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double coeff = clip_coefficient(std::sqrt(sq), max_norm);
  if (coeff < 1.0) {
    for (double& g : grad) g *= coeff;
  }
}

struct TrainConfig {
  std::size_t epochs = 1000;    // outer iterations
  std::size_t rollouts = 1000;  // trajectories collected per epoch
  std::size_t buffer = 0;       // tuple-buffer size; 0 derives it from the rollouts
  std::size_t minibatch = 2048;
  std::size_t passes = 5;  // full shuffled sweeps per epoch
  double lr_init = 5e-4;
  double lr_terminal = 1e-12;
  double gamma = 1.0;
  double lambda_gae = 0.95;
  double clip_eps = 0.2;
  double c0 = 0.0;   // entropy weight
  double c1 = 0.04;  // value weight
  double c2 = 0.08;  // VaR-estimate weight
  double max_grad_norm = 0.5;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (epochs < 1) throw InvalidInput("TrainConfig: epochs must be >= 1");
    if (rollouts < 1 && buffer < 1) {
      throw InvalidInput("TrainConfig: need rollouts or a buffer size");
    }
    if (minibatch < 1) throw InvalidInput("TrainConfig: minibatch must be >= 1");
    if (passes < 1) throw InvalidInput("TrainConfig: passes must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("TrainConfig: gamma must be in [0,1]");
    if (!(clip_eps >= 0.0 && clip_eps < 1.0)) {
      throw InvalidInput("TrainConfig: clip_eps must be in [0,1)");
    }
    if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) {
      throw InvalidInput("TrainConfig: lambda_gae must be in [0,1]");
    }
    if (max_grad_norm <= 0.0) throw InvalidInput("TrainConfig: max_grad_norm must be positive");
    if (c1 < 0.0 || c2 < 0.0 || c0 < 0.0) throw InvalidInput("TrainConfig: weights must be >= 0");
    if (lr_init <= 0.0) throw InvalidInput("TrainConfig: lr_init must be positive");
  }
};

/// Linearly decaying learning rate: lr_init at epoch 0, lr_terminal at the
/// final epoch.
inline double lr_at(std::size_t epoch, const TrainConfig& config) {
  if (config.epochs <= 1) return config.lr_init;
  const double frac = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.lr_init + frac * (config.lr_terminal - config.lr_init);
}

}  // namespace tailhedge
