#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textddi/selector.hpp"

namespace textddi {

struct PPOConfig {
  double lr = 1e-5;
  double weight_decay = 6e-6;
  std::size_t batch_size = 128;  // episodes per update
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int ppo_epochs = 1;
  int num_minibatches = 4;
  double clip_ratio = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool adam = false;

  /// Throws DataError when a field is out of range.
  void validate() const;
  LossCoefficients coefficients() const { return {clip_ratio, value_coef, entropy_coef}; }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} - V_t ; A_t = delta_t + gamma lam A_{t+1};
/// returns_t = A_t + V_t. `values` holds one entry per step plus the
/// terminal value, which must be 0.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double gamma, double lam);

/// (A - mean) / (std + 1e-8) over the batch; fewer than two entries pass
/// through unchanged.
std::vector<double> normalize_advantages(std::span<const double> advantages);

struct UpdateTelemetry {
  double mean_reward = 0.0;  // mean per-step reward
  double mean_episode_length = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::size_t steps = 0;
  std::size_t minibatches = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// One PPO update over a batch of episodes. Advantages are normalized over
/// the batch, then ppo_epochs passes over num_minibatches shuffled step-level
/// minibatches descend the clipped loss. Episodes without steps are skipped.
/// Throws NumericalError on a non-finite loss.
PolicyParams ppo_update(std::span<const Episode> episodes, PolicyParams policy,
                        const PPOConfig& cfg, std::uint64_t seed,
                        UpdateTelemetry* telemetry = nullptr);

}  // namespace textddi
