#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "policy_fixtures.hpp"
#include "textddi/ppo.hpp"

using namespace textddi;

namespace {

std::vector<Episode> episodes_for(const PolicyParams& pol, const PredictorParams& pred, int n,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Episode> out;
  for (int e = 0; e < n; ++e) {
    Drug u = fixtures::random_drug("U" + std::to_string(e), 3, rng);
    Drug v = fixtures::random_drug("V" + std::to_string(e), 3, rng);
    RolloutOptions ro{1000, RolloutMode::sample, {}, {}};
    out.push_back(rollout(u, v, e % static_cast<int>(pred.num_types()), pol, pred, ro, rng));
  }
  return out;
}

double chosen_log_prob(const PolicyParams& pol, const Episode& ep, const EpisodeStep& st) {
  std::vector<std::vector<std::uint64_t>> acts;
  for (int i : st.available) acts.push_back(ep.sentence_hashes[static_cast<std::size_t>(i)]);
  auto s = policy_scores(st.state_hashes, acts, pol);
  double m = -std::numeric_limits<double>::infinity();
  for (double x : s) m = std::max(m, x);
  double z = 0.0;
  for (double x : s) z += std::exp(x - m);
  return s[static_cast<std::size_t>(st.chosen)] - m - std::log(z);
}

}  // namespace

TEST_CASE("compute_gae examples") {
  std::vector<double> r{1, 1}, v{0.5, 0.5, 0};
  auto g = compute_gae(r, v, 0.99, 0.95);
  CHECK(g.advantages[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.advantages[0] == doctest::Approx(1.46525).epsilon(1e-12));
  CHECK(g.returns[0] == doctest::Approx(1.96525).epsilon(1e-12));

  std::vector<double> r3{0.2, -1.0, 3.0}, v3{0.7, -0.1, 0.4, 0.0};
  auto c = compute_gae(r3, v3, 1.0, 1.0);
  CHECK(c.advantages[0] == doctest::Approx(2.2 - 0.7));
  CHECK(c.advantages[1] == doctest::Approx(2.0 + 0.1));
  CHECK(c.advantages[2] == doctest::Approx(3.0 - 0.4));

  std::vector<double> z(4, 0.0), zv(5, 0.0);
  for (double a : compute_gae(z, zv, 0.99, 0.95).advantages) CHECK(a == 0.0);

  CHECK(compute_gae({}, std::vector<double>{0.0}, 0.9, 0.9).advantages.empty());
  CHECK_THROWS_AS(compute_gae(r, std::vector<double>{0.5, 0}, 0.99, 0.95), DataError);
  CHECK_THROWS_AS(compute_gae(r, std::vector<double>{0.5, 0.5, 0.1}, 0.99, 0.95), DataError);
}

TEST_CASE("compute_gae equals the double sum on 500 random episodes") {
  Rng rng(5);
  double worst = 0.0;
  for (int e = 0; e < 500; ++e) {
    const std::size_t T = 1 + uniform_index(rng, 20);
    std::vector<double> r(T), v(T + 1, 0.0);
    for (auto& x : r) x = 4.0 * uniform01(rng) - 2.0;
    for (std::size_t t = 0; t < T; ++t) v[t] = 4.0 * uniform01(rng) - 2.0;
    const double gamma = 0.5 + 0.5 * uniform01(rng), lam = uniform01(rng);
    auto g = compute_gae(r, v, gamma, lam);
    auto o = oracles::gae_double_sum(r, v, gamma, lam);
    for (std::size_t t = 0; t < T; ++t) {
      worst = std::max(worst, std::abs(g.advantages[t] - o[t]));
      CHECK(g.returns[t] == doctest::Approx(o[t] + v[t]));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("normalize_advantages") {
  std::vector<double> a{1.0, 2.0, 3.0, 6.0};
  auto n = normalize_advantages(a);
  double mean = 0, var = 0;
  for (double x : n) mean += x / 4;
  for (double x : n) var += (x - mean) * (x - mean) / 4;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<double> one{0.7};
  CHECK(normalize_advantages(one)[0] == 0.7);
  CHECK(normalize_advantages(std::vector<double>{}).empty());
  auto flat = normalize_advantages(std::vector<double>{2.0, 2.0, 2.0});
  for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("surrogate is invariant to a constant advantage shift") {
  auto pol = fixtures::random_policy(64, 4, 5, 3, 0.5);
  auto pred = fixtures::random_predictor(3, 64, 4, 4, 0.5);
  auto eps = episodes_for(pol, pred, 6, 11);
  Rng rng(12);
  for (double shift : {-3.0, 0.5, 10.0}) {
    std::vector<StepSample> base, moved;
    std::vector<double> adv;
    for (const auto& ep : eps) {
      for (const auto& st : ep.steps) {
        auto s = make_step_sample(ep, st);
        s.old_log_prob += 0.2 * (2.0 * uniform01(rng) - 1.0);
        s.ret = uniform01(rng);
        base.push_back(s);
        adv.push_back(2.0 * uniform01(rng) - 1.0);
      }
    }
    moved = base;
    auto na = normalize_advantages(adv);
    std::vector<double> adv2 = adv;
    for (double& x : adv2) x += shift;
    auto nb = normalize_advantages(adv2);
    for (std::size_t k = 0; k < base.size(); ++k) {
      base[k].advantage = na[k];
      moved[k].advantage = nb[k];
    }
    LossCoefficients c;
    LossStats s1, s2;
    ppo_loss(pol, base, c, &s1);
    ppo_loss(pol, moved, c, &s2);
    CHECK(std::abs(s1.surrogate - s2.surrogate) < 1e-9);
  }
}

TEST_CASE("ppo_update") {
  auto pol = fixtures::random_policy(64, 4, 5, 21, 0.5);
  auto pred = fixtures::random_predictor(3, 64, 4, 22, 0.5);
  auto eps = episodes_for(pol, pred, 8, 23);

  SUBCASE("lr 0 leaves parameters bit-identical") {
    PPOConfig cfg;
    cfg.lr = 0.0;
    cfg.weight_decay = 0.1;
    CHECK(ppo_update(eps, pol, cfg, 1) == pol);
    cfg.adam = true;
    CHECK(ppo_update(eps, pol, cfg, 1) == pol);
  }

  SUBCASE("deterministic for a fixed seed") {
    PPOConfig cfg;
    cfg.lr = 0.01;
    cfg.ppo_epochs = 2;
    auto a = ppo_update(eps, pol, cfg, 9);
    auto b = ppo_update(eps, pol, cfg, 9);
    CHECK(a == b);
    CHECK_FALSE(a == pol);
    auto c = ppo_update(eps, pol, cfg, 10);
    CHECK_FALSE(a == c);
  }

  SUBCASE("single positive-advantage step raises its log-probability") {
    for (std::size_t e = 0; e < eps.size(); ++e) {
      Episode ep = eps[e];
      REQUIRE_FALSE(ep.steps.empty());
      ep.steps.resize(1);
      if (ep.steps[0].available.size() < 2) continue;
      ep.steps[0].reward = 1.0;
      ep.steps[0].value = 0.0;
      ep.steps[0].log_prob = chosen_log_prob(pol, ep, ep.steps[0]);
      PPOConfig cfg;
      cfg.lr = 1e-3;
      cfg.weight_decay = 0.0;
      cfg.entropy_coef = 0.0;
      auto after = ppo_update(std::span<const Episode>(&ep, 1), pol, cfg, 3);
      CHECK(chosen_log_prob(after, ep, ep.steps[0]) > ep.steps[0].log_prob);
    }
  }

  SUBCASE("telemetry") {
    PPOConfig cfg;
    cfg.lr = 0.01;
    cfg.num_minibatches = 3;
    cfg.ppo_epochs = 2;
    UpdateTelemetry tel;
    auto out = ppo_update(eps, pol, cfg, 4, &tel);
    std::size_t steps = 0;
    double rsum = 0.0;
    for (const auto& ep : eps) {
      steps += ep.steps.size();
      for (const auto& st : ep.steps) rsum += st.reward;
    }
    CHECK(tel.steps == steps);
    CHECK(tel.minibatches == 6);
    CHECK(tel.mean_reward == doctest::Approx(rsum / static_cast<double>(steps)));
    CHECK(tel.mean_episode_length == doctest::Approx(static_cast<double>(steps) / 8.0));
    CHECK(tel.entropy >= 0.0);
    CHECK(tel.clip_fraction >= 0.0);
    CHECK(tel.clip_fraction <= 1.0);
    for (double x : out.score_out) CHECK(std::isfinite(x));
    CHECK(UpdateTelemetry::csv_header().find("clip_fraction") != std::string::npos);
  }

  SUBCASE("empty episodes are skipped") {
    std::vector<Episode> empty(2);
    PPOConfig cfg;
    cfg.lr = 0.1;
    UpdateTelemetry tel;
    CHECK(ppo_update(empty, pol, cfg, 1, &tel) == pol);
    CHECK(tel.steps == 0);
  }

  SUBCASE("non-finite loss names the pair") {
    auto bad = pol;
    bad.score_out[0] = std::numeric_limits<double>::quiet_NaN();
    PPOConfig cfg;
    cfg.lr = 0.01;
    try {
      ppo_update(eps, bad, cfg, 1);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("pair U") != std::string::npos);
    }
  }
}

TEST_CASE("PPOConfig validation") {
  auto bad = [](auto mutate) {
    PPOConfig c;
    mutate(c);
    return c;
  };
  CHECK_NOTHROW(PPOConfig{}.validate());
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.gamma = 0.0; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.gamma = 1.5; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.gae_lambda = -0.1; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.clip_ratio = 0.0; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.batch_size = 0; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.num_minibatches = 0; }).validate(), DataError);
  CHECK_THROWS_AS(bad([](PPOConfig& c) { c.lr = -1.0; }).validate(), DataError);
  CHECK(PPOConfig{}.clip_ratio == 0.1);
  CHECK(PPOConfig{}.lr == 1e-5);
}
