#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "textddi/corpus.hpp"
#include "textddi/prompt.hpp"
#include "textddi/textenc.hpp"

namespace textddi {

/// Information selector. Scores each candidate sentence a against the
/// current prompt p with
///   s(a) = w2 . tanh(W1 [enc(a) ; enc(p)] + b1) + b2
/// and a state-value head V(p) = v2 . tanh(V1 enc(p) + c1) + c2.
struct PolicyParams {
  EncoderParams encoder;
  Matrix score_hidden;                  // H x 2d
  std::vector<double> score_hidden_bias;  // H
  std::vector<double> score_out;          // H
  double score_out_bias = 0.0;
  Matrix value_hidden;                  // H x d
  std::vector<double> value_hidden_bias;  // H
  std::vector<double> value_out;          // H
  double value_out_bias = 0.0;

  std::size_t hidden() const { return score_out.size(); }
  bool operator==(const PolicyParams&) const = default;
};

/// Deep copy of `encoder`; hidden layers uniform in [-0.5/d, 0.5/d]; output
/// layers zero, so the first policy is uniform and the first value is 0.
PolicyParams init_policy(const EncoderParams& encoder, std::size_t hidden, std::uint64_t seed);

struct PolicyGrad {
  SparseRows table;
  Matrix score_hidden;
  std::vector<double> score_hidden_bias;
  std::vector<double> score_out;
  double score_out_bias = 0.0;
  Matrix value_hidden;
  std::vector<double> value_hidden_bias;
  std::vector<double> value_out;
  double value_out_bias = 0.0;

  static PolicyGrad zeros_like(const PolicyParams& p);
};

void apply_gradient(Optimizer& opt, PolicyParams& params, const PolicyGrad& grad, double scale);

std::string policy_to_bytes(const PolicyParams& params);
PolicyParams policy_from_bytes(std::string_view bytes);
void save_policy(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// MDP pieces

/// Unselected sentences of u then v, each in description order.
std::vector<const Sentence*> action_space(const Drug& u, const Drug& v,
                                          const std::set<SentenceRef>& selected);
std::vector<const Sentence*> action_space(const Drug& u, const Drug& v, const Prompt& state);

/// Raw scores s(a) for each action, given hashed state and action texts.
std::vector<double> policy_scores(std::span<const std::uint64_t> state,
                                  std::span<const std::vector<std::uint64_t>> actions,
                                  const PolicyParams& params);
double state_value(std::span<const std::uint64_t> state, const PolicyParams& params);

/// Softmax of s(a) over the action set. Throws InvariantError when empty.
std::vector<double> policy_distribution(const Prompt& state,
                                        std::span<const Sentence* const> actions,
                                        const PolicyParams& params);

struct RewardConfig {
  double lambda1 = 1.0;  // weight when the true type wins
  double lambda2 = 1.0;  // weight when it loses
};

/// d = log P(i) - max_{i' != i} log P(i'); returns lambda1*d if d > 0 else
/// lambda2*d. Exact zeros are clamped to 1e-12 before the log.
double quality(std::span<const double> probs, int true_type, const RewardConfig& cfg = {});

inline double step_reward(double q_t, double q_prev) { return q_t - q_prev; }

enum class RolloutMode { sample, greedy };

struct EpisodeStep {
  std::string state_text;                   // render(p_{t-1})
  std::vector<std::uint64_t> state_hashes;  // token hashes of state_text
  std::vector<int> available;               // indices into Episode::sentences
  int chosen = 0;                           // position within `available`
  SentenceRef action;
  std::string action_text;
  double log_prob = 0.0;
  double value = 0.0;  // V(p_{t-1})
  double q = 0.0;      // quality of p_t
  double reward = 0.0;
};

struct Episode {
  std::string u, v;
  int type = 0;
  std::vector<Sentence> sentences;  // u's then v's
  std::vector<std::vector<std::uint64_t>> sentence_hashes;
  double q0 = 0.0;  // quality of p_0
  std::vector<EpisodeStep> steps;
  Prompt final_prompt;

  double final_quality() const { return steps.empty() ? q0 : steps.back().q; }
};

struct RolloutOptions {
  int budget = kDefaultBudget;
  RolloutMode mode = RolloutMode::greedy;
  RewardConfig reward;
  PromptFormat format;
};

/// Builds a prompt one sentence at a time from p_0. Sample mode draws from
/// the policy; greedy takes the first maximum. Stops when the action set is
/// exhausted or the chosen sentence no longer fits (that step is dropped).
Episode rollout(const Drug& u, const Drug& v, int true_type, const PolicyParams& policy,
                const PredictorParams& predictor, const RolloutOptions& options, Rng& rng);

// ---------------------------------------------------------------------------
// PPO loss and its analytic gradient

struct StepSample {
  std::span<const std::uint64_t> state;
  std::span<const std::vector<std::uint64_t>> sentence_hashes;
  std::span<const int> available;
  int chosen = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;  // value target
};

/// Builds a StepSample view over an episode step (advantage/ret unset).
StepSample make_step_sample(const Episode& episode, const EpisodeStep& step);

struct LossCoefficients {
  double clip_ratio = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct LossStats {
  double loss = 0.0;       // minimized quantity
  double surrogate = 0.0;  // mean clipped objective (maximized)
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double max_ratio = 0.0;
};

/// Mean over steps of -min(r A, clip(r, 1-eps, 1+eps) A) + c_v (V - ret)^2
/// - c_e H(pi), with r = exp(log pi(a) - old_log_prob).
double ppo_loss(const PolicyParams& params, std::span<const StepSample> steps,
                const LossCoefficients& coef, LossStats* stats = nullptr);

/// Analytic gradient of ppo_loss. The value term reaches only the value
/// head; the policy terms reach the score MLP and the shared encoder through
/// both enc(a) and enc(p).
PolicyGrad policy_gradient(const PolicyParams& params, std::span<const StepSample> steps,
                           const LossCoefficients& coef);

}  // namespace textddi
