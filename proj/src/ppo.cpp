#include "textddi/ppo.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace textddi {

void PPOConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DataError("ppo.gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw DataError("ppo.gae_lambda must lie in [0, 1]");
  if (!(clip_ratio > 0.0)) throw DataError("ppo.clip_ratio must be positive");
  if (batch_size < 1 || ppo_epochs < 1 || num_minibatches < 1) {
    throw DataError("ppo batch_size, ppo_epochs and num_minibatches must be >= 1");
  }
  if (lr < 0.0 || weight_decay < 0.0) throw DataError("ppo.lr and ppo.weight_decay must be >= 0");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double gamma, double lam) {
  if (values.size() != rewards.size() + 1) {
    throw DataError("compute_gae: values must have exactly one more entry than rewards");
  }
  if (values.back() != 0.0) throw DataError("compute_gae: terminal value must be 0");
  const std::size_t T = rewards.size();
  GaeResult r;
  r.advantages.assign(T, 0.0);
  r.returns.assign(T, 0.0);
  double next = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    next = delta + gamma * lam * next;
    r.advantages[t] = next;
    r.returns[t] = next + values[t];
  }
  return r;
}

std::vector<double> normalize_advantages(std::span<const double> advantages) {
  std::vector<double> out(advantages.begin(), advantages.end());
  if (out.size() < 2) return out;
  const double n = static_cast<double>(out.size());
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
  double var = 0.0;
  for (double a : out) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : out) a = (a - mean) / (sd + 1e-8);
  return out;
}

std::string UpdateTelemetry::csv_header() {
  return "mean_reward,mean_episode_length,surrogate,value_loss,entropy,clip_fraction";
}

std::string UpdateTelemetry::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << mean_reward << ',' << mean_episode_length << ',' << surrogate << ',' << value_loss << ','
     << entropy << ',' << clip_fraction;
  return os.str();
}

PolicyParams ppo_update(std::span<const Episode> episodes, PolicyParams policy,
                        const PPOConfig& cfg, std::uint64_t seed, UpdateTelemetry* telemetry) {
  cfg.validate();
  std::vector<StepSample> samples;
  std::vector<std::pair<std::string, std::string>> pair_of_step;
  double reward_sum = 0.0;
  std::size_t n_episodes = 0;
  for (const auto& ep : episodes) {
    if (ep.steps.empty()) continue;
    ++n_episodes;
    std::vector<double> rewards, values;
    for (const auto& st : ep.steps) {
      rewards.push_back(st.reward);
      values.push_back(st.value);
      reward_sum += st.reward;
    }
    values.push_back(0.0);
    auto gae = compute_gae(rewards, values, cfg.gamma, cfg.gae_lambda);
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      StepSample s = make_step_sample(ep, ep.steps[t]);
      s.advantage = gae.advantages[t];
      s.ret = gae.returns[t];
      samples.push_back(s);
      pair_of_step.emplace_back(ep.u, ep.v);
    }
  }
  UpdateTelemetry tel;
  tel.steps = samples.size();
  if (samples.empty()) {
    if (telemetry) *telemetry = tel;
    return policy;
  }
  tel.mean_reward = reward_sum / static_cast<double>(samples.size());
  tel.mean_episode_length =
      static_cast<double>(samples.size()) / static_cast<double>(n_episodes);

  {
    std::vector<double> adv;
    for (const auto& s : samples) adv.push_back(s.advantage);
    adv = normalize_advantages(adv);
    for (std::size_t k = 0; k < samples.size(); ++k) samples[k].advantage = adv[k];
  }

  OptConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  oc.adam = cfg.adam;
  Optimizer opt(oc);
  const auto coef = cfg.coefficients();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<StepSample> mb;
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    Rng rng(derive_seed(seed, 0x70706f, epoch));
    shuffle_in_place(order, rng);
    const std::size_t n_mb = std::min<std::size_t>(cfg.num_minibatches, order.size());
    for (std::size_t b = 0; b < n_mb; ++b) {
      const std::size_t begin = b * order.size() / n_mb;
      const std::size_t end = (b + 1) * order.size() / n_mb;
      mb.clear();
      for (std::size_t k = begin; k < end; ++k) mb.push_back(samples[order[k]]);
      LossStats st;
      const double loss = ppo_loss(policy, mb, coef, &st);
      if (!std::isfinite(loss)) {
        std::size_t worst = begin;
        for (std::size_t k = begin; k < end; ++k) {
          if (!std::isfinite(ppo_loss(policy, std::span<const StepSample>(&samples[order[k]], 1), coef))) {
            worst = k;
            break;
          }
        }
        std::ostringstream os;
        os << "non-finite PPO loss (max ratio " << st.max_ratio << ", pair "
           << pair_of_step[order[worst]].first << "-" << pair_of_step[order[worst]].second << ")";
        throw NumericalError(os.str());
      }
      tel.surrogate += st.surrogate;
      tel.value_loss += st.value_loss;
      tel.entropy += st.entropy;
      tel.clip_fraction += st.clip_fraction;
      ++tel.minibatches;
      auto g = policy_gradient(policy, mb, coef);
      apply_gradient(opt, policy, g, 1.0);
    }
  }
  if (tel.minibatches > 0) {
    const double m = static_cast<double>(tel.minibatches);
    tel.surrogate /= m;
    tel.value_loss /= m;
    tel.entropy /= m;
    tel.clip_fraction /= m;
  }
  if (telemetry) *telemetry = tel;
  return policy;
}

}  // namespace textddi
