#include "textddi/selector.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>

#include "textddi/tokenizer.hpp"

namespace textddi {

PolicyParams init_policy(const EncoderParams& encoder, std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw DataError("policy hidden size must be positive");
  PolicyParams p;
  p.encoder = encoder;
  const std::size_t d = encoder.dim_embed;
  Rng rng(derive_seed(seed, 0x706f6c));
  const double a = 0.5 / static_cast<double>(d);
  auto fill = [&](std::vector<double>& v) {
    for (double& x : v) x = -a + 2.0 * a * uniform01(rng);
  };
  p.score_hidden = Matrix(hidden, 2 * d);
  fill(p.score_hidden.data);
  p.score_hidden_bias.assign(hidden, 0.0);
  p.score_out.assign(hidden, 0.0);
  p.value_hidden = Matrix(hidden, d);
  fill(p.value_hidden.data);
  p.value_hidden_bias.assign(hidden, 0.0);
  p.value_out.assign(hidden, 0.0);
  return p;
}

PolicyGrad PolicyGrad::zeros_like(const PolicyParams& p) {
  PolicyGrad g;
  g.table.cols = p.encoder.dim_embed;
  g.score_hidden = Matrix(p.score_hidden.rows, p.score_hidden.cols);
  g.score_hidden_bias.assign(p.hidden(), 0.0);
  g.score_out.assign(p.hidden(), 0.0);
  g.value_hidden = Matrix(p.value_hidden.rows, p.value_hidden.cols);
  g.value_hidden_bias.assign(p.hidden(), 0.0);
  g.value_out.assign(p.hidden(), 0.0);
  return g;
}

void apply_gradient(Optimizer& opt, PolicyParams& params, const PolicyGrad& grad, double scale) {
  opt.next();
  opt.sparse(0, params.encoder.table, grad.table, scale);
  opt.dense(1, params.score_hidden.data, grad.score_hidden.data, scale);
  opt.dense(2, params.score_hidden_bias, grad.score_hidden_bias, scale);
  opt.dense(3, params.score_out, grad.score_out, scale);
  opt.dense(4, std::span<double>(&params.score_out_bias, 1),
            std::span<const double>(&grad.score_out_bias, 1), scale);
  opt.dense(5, params.value_hidden.data, grad.value_hidden.data, scale);
  opt.dense(6, params.value_hidden_bias, grad.value_hidden_bias, scale);
  opt.dense(7, params.value_out, grad.value_out, scale);
  opt.dense(8, std::span<double>(&params.value_out_bias, 1),
            std::span<const double>(&grad.value_out_bias, 1), scale);
}

std::string policy_to_bytes(const PolicyParams& p) {
  std::string out = "TXP1";
  detail::put_u32(out, 3);
  detail::put_u32(out, p.encoder.dim_hash);
  detail::put_u32(out, p.encoder.dim_embed);
  detail::put_u32(out, static_cast<std::uint32_t>(p.hidden()));
  detail::put_f64s(out, p.encoder.table.data);
  detail::put_f64s(out, p.score_hidden.data);
  detail::put_f64s(out, p.score_hidden_bias);
  detail::put_f64s(out, p.score_out);
  detail::put_f64s(out, std::span<const double>(&p.score_out_bias, 1));
  detail::put_f64s(out, p.value_hidden.data);
  detail::put_f64s(out, p.value_hidden_bias);
  detail::put_f64s(out, p.value_out);
  detail::put_f64s(out, std::span<const double>(&p.value_out_bias, 1));
  return out;
}

PolicyParams policy_from_bytes(std::string_view bytes) {
  detail::ByteReader in(bytes);
  in.expect_magic("TXP1");
  if (in.u32() != 3) throw DataError("policy checkpoint must carry 3 dims");
  PolicyParams p;
  p.encoder.dim_hash = in.u32();
  p.encoder.dim_embed = in.u32();
  const std::size_t h = in.u32();
  const std::size_t d = p.encoder.dim_embed;
  if (p.encoder.dim_hash == 0 || (p.encoder.dim_hash & (p.encoder.dim_hash - 1)) != 0 || d == 0 ||
      h == 0) {
    throw DataError("policy checkpoint has invalid dims");
  }
  p.encoder.table = Matrix(p.encoder.dim_hash, d);
  p.score_hidden = Matrix(h, 2 * d);
  p.score_hidden_bias.assign(h, 0.0);
  p.score_out.assign(h, 0.0);
  p.value_hidden = Matrix(h, d);
  p.value_hidden_bias.assign(h, 0.0);
  p.value_out.assign(h, 0.0);
  in.f64s(p.encoder.table.data);
  in.f64s(p.score_hidden.data);
  in.f64s(p.score_hidden_bias);
  in.f64s(p.score_out);
  in.f64s(std::span<double>(&p.score_out_bias, 1));
  in.f64s(p.value_hidden.data);
  in.f64s(p.value_hidden_bias);
  in.f64s(p.value_out);
  in.f64s(std::span<double>(&p.value_out_bias, 1));
  if (!in.done()) throw DataError("trailing bytes in policy checkpoint");
  return p;
}

void save_policy(const PolicyParams& params, const std::filesystem::path& path) {
  detail::write_file(path, policy_to_bytes(params));
}

PolicyParams load_policy(const std::filesystem::path& path) {
  return policy_from_bytes(detail::read_file(path));
}

// ---------------------------------------------------------------------------

std::vector<const Sentence*> action_space(const Drug& u, const Drug& v,
                                          const std::set<SentenceRef>& selected) {
  std::vector<const Sentence*> out;
  for (const Drug* d : {&u, &v}) {
    for (const auto& s : d->sentences) {
      if (!selected.count(SentenceRef{s.drug_id, s.index})) out.push_back(&s);
    }
  }
  return out;
}

std::vector<const Sentence*> action_space(const Drug& u, const Drug& v, const Prompt& state) {
  std::set<SentenceRef> selected;
  for (const auto& s : state.u_sel()) selected.insert({s.drug_id, s.index});
  for (const auto& s : state.v_sel()) selected.insert({s.drug_id, s.index});
  return action_space(u, v, selected);
}

namespace {

// Hidden pre-activation contribution of enc(p): W1[:, d:2d] e_p + b1.
std::vector<double> state_projection(std::span<const double> e_p, const PolicyParams& p) {
  const std::size_t d = p.encoder.dim_embed;
  std::vector<double> out(p.hidden());
  for (std::size_t h = 0; h < out.size(); ++h) {
    auto w = p.score_hidden.row(h);
    double acc = p.score_hidden_bias[h];
    for (std::size_t c = 0; c < d; ++c) acc += w[d + c] * e_p[c];
    out[h] = acc;
  }
  return out;
}

// Fills `hidden` with tanh(W1[:, :d] e_a + proj) and returns the score.
double action_score(std::span<const double> e_a, std::span<const double> proj,
                    const PolicyParams& p, std::vector<double>& hidden) {
  const std::size_t d = p.encoder.dim_embed;
  hidden.resize(p.hidden());
  double s = p.score_out_bias;
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    auto w = p.score_hidden.row(h);
    double acc = proj[h];
    for (std::size_t c = 0; c < d; ++c) acc += w[c] * e_a[c];
    hidden[h] = std::tanh(acc);
    s += p.score_out[h] * hidden[h];
  }
  return s;
}

double value_from_encoding(std::span<const double> e_p, const PolicyParams& p,
                           std::vector<double>* hidden_out) {
  const std::size_t d = p.encoder.dim_embed;
  std::vector<double> hidden(p.hidden());
  double v = p.value_out_bias;
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    auto w = p.value_hidden.row(h);
    double acc = p.value_hidden_bias[h];
    for (std::size_t c = 0; c < d; ++c) acc += w[c] * e_p[c];
    hidden[h] = std::tanh(acc);
    v += p.value_out[h] * hidden[h];
  }
  if (hidden_out) *hidden_out = std::move(hidden);
  return v;
}

std::vector<double> log_softmax(std::span<const double> s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double x : s) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = s[k] - lse;
  return out;
}

std::atomic<bool> g_clamp_reported{false};

}  // namespace

std::vector<double> policy_scores(std::span<const std::uint64_t> state,
                                  std::span<const std::vector<std::uint64_t>> actions,
                                  const PolicyParams& params) {
  const auto e_p = encode_hashes(state, params.encoder);
  const auto proj = state_projection(e_p, params);
  std::vector<double> scores;
  scores.reserve(actions.size());
  std::vector<double> hidden;
  for (const auto& a : actions) {
    scores.push_back(action_score(encode_hashes(a, params.encoder), proj, params, hidden));
  }
  return scores;
}

double state_value(std::span<const std::uint64_t> state, const PolicyParams& params) {
  return value_from_encoding(encode_hashes(state, params.encoder), params, nullptr);
}

std::vector<double> policy_distribution(const Prompt& state,
                                        std::span<const Sentence* const> actions,
                                        const PolicyParams& params) {
  if (actions.empty()) throw InvariantError("policy_distribution: empty action set");
  std::vector<std::vector<std::uint64_t>> hashed;
  hashed.reserve(actions.size());
  for (const Sentence* s : actions) hashed.push_back(token_hashes(s->text));
  return softmax(policy_scores(token_hashes(state.render()), hashed, params));
}

double quality(std::span<const double> probs, int true_type, const RewardConfig& cfg) {
  if (probs.size() < 2) throw InvariantError("quality needs at least two interaction types");
  if (true_type < 0 || static_cast<std::size_t>(true_type) >= probs.size()) {
    throw InvariantError("quality: true type out of range");
  }
  constexpr double kFloor = 1e-12;
  auto safe_log = [&](double p) {
    if (p <= 0.0) {
      if (!g_clamp_reported.exchange(true)) {
        std::cerr << "warning: zero probability clamped to 1e-12 in quality score\n";
      }
      p = kFloor;
    }
    return std::log(p);
  };
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (static_cast<int>(k) == true_type) continue;
    best_other = std::max(best_other, safe_log(probs[k]));
  }
  const double d = safe_log(probs[static_cast<std::size_t>(true_type)]) - best_other;
  return d > 0.0 ? cfg.lambda1 * d : cfg.lambda2 * d;
}

Episode rollout(const Drug& u, const Drug& v, int true_type, const PolicyParams& policy,
                const PredictorParams& predictor, const RolloutOptions& options, Rng& rng) {
  if (policy.encoder.dim_embed == 0 || predictor.num_types() < 2) {
    throw InvariantError("rollout: incompatible parameters");
  }
  Episode ep;
  ep.u = u.id;
  ep.v = v.id;
  ep.type = true_type;
  for (const Drug* d : {&u, &v}) {
    for (const auto& s : d->sentences) {
      ep.sentences.push_back(s);
      ep.sentence_hashes.push_back(token_hashes(s.text));
    }
  }
  std::vector<std::vector<double>> enc_a;
  enc_a.reserve(ep.sentences.size());
  for (const auto& h : ep.sentence_hashes) enc_a.push_back(encode_hashes(h, policy.encoder));

  Prompt p = Prompt::start(u, v, options.budget, options.format);
  std::string state_text = p.render();
  std::vector<std::uint64_t> state_hashes = token_hashes(state_text);
  double q_prev = quality(predictor_forward_hashes(state_hashes, predictor), true_type,
                          options.reward);
  ep.q0 = q_prev;

  std::vector<int> available(ep.sentences.size());
  for (std::size_t k = 0; k < available.size(); ++k) available[k] = static_cast<int>(k);
  std::vector<double> hidden;
  while (!available.empty()) {
    const auto e_p = encode_hashes(state_hashes, policy.encoder);
    const auto proj = state_projection(e_p, policy);
    std::vector<double> scores(available.size());
    for (std::size_t k = 0; k < available.size(); ++k) {
      scores[k] = action_score(enc_a[static_cast<std::size_t>(available[k])], proj, policy, hidden);
    }
    const auto logp = log_softmax(scores);
    std::size_t pick = 0;
    if (options.mode == RolloutMode::greedy) {
      for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[pick]) pick = k;
      }
    } else {
      double r = uniform01(rng);
      pick = scores.size() - 1;
      for (std::size_t k = 0; k < scores.size(); ++k) {
        r -= std::exp(logp[k]);
        if (r < 0.0) {
          pick = k;
          break;
        }
      }
    }
    const Sentence& chosen = ep.sentences[static_cast<std::size_t>(available[pick])];
    auto appended = try_append(p, chosen);
    if (!appended.accepted) break;

    EpisodeStep step;
    step.available = available;
    step.chosen = static_cast<int>(pick);
    step.action = {chosen.drug_id, chosen.index};
    step.action_text = chosen.text;
    step.log_prob = logp[pick];
    step.value = value_from_encoding(e_p, policy, nullptr);

    p = std::move(appended.prompt);
    std::string next_text = p.render();
    std::vector<std::uint64_t> next_hashes = token_hashes(next_text);
    step.q = quality(predictor_forward_hashes(next_hashes, predictor), true_type, options.reward);
    step.reward = step_reward(step.q, q_prev);
    step.state_text = std::move(state_text);
    step.state_hashes = std::move(state_hashes);
    ep.steps.push_back(std::move(step));

    q_prev = ep.steps.back().q;
    state_text = std::move(next_text);
    state_hashes = std::move(next_hashes);
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  ep.final_prompt = std::move(p);
  return ep;
}

// ---------------------------------------------------------------------------

StepSample make_step_sample(const Episode& episode, const EpisodeStep& step) {
  StepSample s;
  s.state = step.state_hashes;
  s.sentence_hashes = episode.sentence_hashes;
  s.available = step.available;
  s.chosen = step.chosen;
  s.old_log_prob = step.log_prob;
  return s;
}

namespace {

struct StepForward {
  std::vector<double> e_p;
  std::vector<std::vector<double>> e_a;
  std::vector<std::vector<double>> hidden;  // per action
  std::vector<double> logp;
  std::vector<double> value_hidden;
  double value = 0.0;
  double ratio = 0.0;
  double entropy = 0.0;
};

StepForward forward_step(const PolicyParams& p, const StepSample& s) {
  if (s.available.empty()) throw InvariantError("step without actions");
  StepForward f;
  f.e_p = encode_hashes(s.state, p.encoder);
  const auto proj = state_projection(f.e_p, p);
  std::vector<double> scores(s.available.size());
  f.e_a.resize(s.available.size());
  f.hidden.resize(s.available.size());
  for (std::size_t k = 0; k < s.available.size(); ++k) {
    f.e_a[k] = encode_hashes(s.sentence_hashes[static_cast<std::size_t>(s.available[k])], p.encoder);
    scores[k] = action_score(f.e_a[k], proj, p, f.hidden[k]);
  }
  f.logp = log_softmax(scores);
  for (double lp : f.logp) f.entropy -= std::exp(lp) * lp;
  f.ratio = std::exp(f.logp[static_cast<std::size_t>(s.chosen)] - s.old_log_prob);
  f.value = value_from_encoding(f.e_p, p, &f.value_hidden);
  return f;
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

double ppo_loss(const PolicyParams& params, std::span<const StepSample> steps,
                const LossCoefficients& coef, LossStats* stats) {
  if (steps.empty()) throw InvariantError("ppo_loss: empty batch");
  LossStats st;
  for (const auto& s : steps) {
    auto f = forward_step(params, s);
    const double surr1 = f.ratio * s.advantage;
    const double surr2 = clip(f.ratio, 1.0 - coef.clip_ratio, 1.0 + coef.clip_ratio) * s.advantage;
    const double obj = std::min(surr1, surr2);
    const double verr = f.value - s.ret;
    st.surrogate += obj;
    st.value_loss += verr * verr;
    st.entropy += f.entropy;
    if (std::abs(f.ratio - 1.0) > coef.clip_ratio) st.clip_fraction += 1.0;
    st.max_ratio = std::max(st.max_ratio, f.ratio);
  }
  const double n = static_cast<double>(steps.size());
  st.surrogate /= n;
  st.value_loss /= n;
  st.entropy /= n;
  st.clip_fraction /= n;
  st.loss = -st.surrogate + coef.value_coef * st.value_loss - coef.entropy_coef * st.entropy;
  if (stats) *stats = st;
  return st.loss;
}

PolicyGrad policy_gradient(const PolicyParams& params, std::span<const StepSample> steps,
                           const LossCoefficients& coef) {
  if (steps.empty()) throw InvariantError("policy_gradient: empty batch");
  const std::size_t d = params.encoder.dim_embed;
  const std::size_t H = params.hidden();
  const double inv_n = 1.0 / static_cast<double>(steps.size());
  PolicyGrad g = PolicyGrad::zeros_like(params);
  std::vector<double> de_p(d), de_a(d), dpre(H);

  for (const auto& s : steps) {
    const auto f = forward_step(params, s);
    const std::size_t chosen = static_cast<std::size_t>(s.chosen);

    // d loss / d log pi(chosen): the clipped branch carries no gradient.
    const double surr1 = f.ratio * s.advantage;
    const double surr2 = clip(f.ratio, 1.0 - coef.clip_ratio, 1.0 + coef.clip_ratio) * s.advantage;
    const double d_logp = surr2 < surr1 ? 0.0 : -f.ratio * s.advantage;

    std::fill(de_p.begin(), de_p.end(), 0.0);
    for (std::size_t k = 0; k < f.logp.size(); ++k) {
      const double pk = std::exp(f.logp[k]);
      double ds = d_logp * ((k == chosen ? 1.0 : 0.0) - pk) +
                  coef.entropy_coef * pk * (f.logp[k] + f.entropy);
      ds *= inv_n;
      if (ds == 0.0) continue;
      g.score_out_bias += ds;
      const auto& h = f.hidden[k];
      for (std::size_t j = 0; j < H; ++j) {
        g.score_out[j] += ds * h[j];
        dpre[j] = ds * params.score_out[j] * (1.0 - h[j] * h[j]);
        g.score_hidden_bias[j] += dpre[j];
      }
      std::fill(de_a.begin(), de_a.end(), 0.0);
      for (std::size_t j = 0; j < H; ++j) {
        if (dpre[j] == 0.0) continue;
        auto w = params.score_hidden.row(j);
        auto gw = g.score_hidden.row(j);
        for (std::size_t c = 0; c < d; ++c) {
          gw[c] += dpre[j] * f.e_a[k][c];
          gw[d + c] += dpre[j] * f.e_p[c];
          de_a[c] += dpre[j] * w[c];
          de_p[c] += dpre[j] * w[d + c];
        }
      }
      backprop_encoding(s.sentence_hashes[static_cast<std::size_t>(s.available[k])],
                        params.encoder, de_a, g.table);
    }
    if (std::any_of(de_p.begin(), de_p.end(), [](double x) { return x != 0.0; })) {
      backprop_encoding(s.state, params.encoder, de_p, g.table);
    }

    // Value head; its input encoding is treated as a constant.
    const double dv = 2.0 * coef.value_coef * (f.value - s.ret) * inv_n;
    g.value_out_bias += dv;
    for (std::size_t j = 0; j < H; ++j) {
      const double hj = f.value_hidden[j];
      g.value_out[j] += dv * hj;
      const double dpv = dv * params.value_out[j] * (1.0 - hj * hj);
      g.value_hidden_bias[j] += dpv;
      auto gw = g.value_hidden.row(j);
      for (std::size_t c = 0; c < d; ++c) gw[c] += dpv * f.e_p[c];
    }
  }
  return g;
}

}  // namespace textddi
