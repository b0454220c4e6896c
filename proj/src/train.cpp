#include "textddi/train.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "textddi/tokenizer.hpp"

namespace textddi {

using nlohmann::json;

namespace {

// Runs f(0..n-1) on up to `jobs` threads; results must be written by index.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

enum SeedTag : std::uint64_t {
  kPretrain = 1,
  kPretrainPrompt,
  kSelectorOrder,
  kRollout,
  kPpo,
  kRoundPredictor,
  kEvalRandom,
  kEvalNegatives,
  kPredictorInit,
  kPolicyInit,
};

std::vector<std::size_t> positive_only(const Corpus& corpus, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  for (std::size_t t : idx) {
    if (corpus.triples()[t].polarity == Polarity::positive) out.push_back(t);
  }
  return out;
}

bool use_pr_auc(const Corpus& corpus, const PipelineConfig& cfg) {
  if (cfg.eval_metric == "pr_auc") return true;
  if (cfg.eval_metric == "macro_f1") return false;
  return corpus.multilabel();
}

json opt_to_json(const OptConfig& o) {
  return {{"lr", o.lr},       {"weight_decay", o.weight_decay}, {"batch_size", o.batch_size},
          {"epochs", o.epochs}, {"adam", o.adam}};
}

OptConfig opt_from_json(const json& j, OptConfig o) {
  o.lr = j.value("lr", o.lr);
  o.weight_decay = j.value("weight_decay", o.weight_decay);
  o.batch_size = j.value("batch_size", o.batch_size);
  o.epochs = j.value("epochs", o.epochs);
  o.adam = j.value("adam", o.adam);
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

PipelineConfig::PipelineConfig() { predictor.epochs = 5; }

PipelineConfig PipelineConfig::synth_benchmark() {
  PipelineConfig c;
  c.predictor.lr = 0.02;
  c.predictor.weight_decay = 0.0;
  c.predictor.batch_size = 32;
  c.predictor.epochs = 30;
  c.predictor.adam = true;
  c.predictor_round_epochs = 3;
  c.ppo.lr = 1e-2;
  c.ppo.weight_decay = 0.0;
  c.ppo.batch_size = 64;
  c.ppo.adam = true;
  c.selector_passes = 12;
  c.rounds_max = 10;
  c.patience = 3;
  c.dim_hash = 1u << 12;
  c.dim_embed = 32;
  c.policy_hidden = 32;
  return c;
}

void PipelineConfig::validate() const {
  ppo.validate();
  if (rounds_max < 1) throw DataError("rounds_max must be >= 1");
  if (patience < 1) throw DataError("patience must be >= 1");
  if (budget < 1) throw DataError("budget must be positive");
  if (predictor.batch_size < 1 || predictor.epochs < 0 || predictor_round_epochs < 0) {
    throw DataError("predictor batch_size must be >= 1 and epochs >= 0");
  }
  if (selector_passes < 0) throw DataError("selector_passes must be >= 0");
  if (eval_metric != "auto" && eval_metric != "macro_f1" && eval_metric != "pr_auc") {
    throw DataError("eval_metric must be auto, macro_f1 or pr_auc");
  }
  if (dim_hash == 0 || (dim_hash & (dim_hash - 1)) != 0) throw DataError("dim_hash must be a power of two");
  if (dim_embed == 0 || policy_hidden == 0) throw DataError("dim_embed and policy_hidden must be positive");
  if (!(reward.lambda1 > 0.0) || !(reward.lambda2 > 0.0)) throw DataError("reward lambdas must be > 0");
  if (jobs < 1) throw DataError("jobs must be >= 1");
}

json PipelineConfig::to_json() const {
  return {{"predictor", opt_to_json(predictor)},
          {"predictor_round_epochs", predictor_round_epochs},
          {"ppo",
           {{"lr", ppo.lr},
            {"weight_decay", ppo.weight_decay},
            {"batch_size", ppo.batch_size},
            {"gamma", ppo.gamma},
            {"gae_lambda", ppo.gae_lambda},
            {"ppo_epochs", ppo.ppo_epochs},
            {"num_minibatches", ppo.num_minibatches},
            {"clip_ratio", ppo.clip_ratio},
            {"value_coef", ppo.value_coef},
            {"entropy_coef", ppo.entropy_coef},
            {"adam", ppo.adam}}},
          {"selector_passes", selector_passes},
          {"budget", budget},
          {"rounds_max", rounds_max},
          {"patience", patience},
          {"eval_metric", eval_metric},
          {"dim_hash", dim_hash},
          {"dim_embed", dim_embed},
          {"policy_hidden", policy_hidden},
          {"reward", {{"lambda1", reward.lambda1}, {"lambda2", reward.lambda2}}},
          {"instruction", format.instruction},
          {"seed", seed},
          {"jobs", jobs}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  try {
    if (j.contains("predictor")) c.predictor = opt_from_json(j.at("predictor"), c.predictor);
    c.predictor_round_epochs = j.value("predictor_round_epochs", c.predictor_round_epochs);
    if (j.contains("ppo")) {
      const auto& p = j.at("ppo");
      c.ppo.lr = p.value("lr", c.ppo.lr);
      c.ppo.weight_decay = p.value("weight_decay", c.ppo.weight_decay);
      c.ppo.batch_size = p.value("batch_size", c.ppo.batch_size);
      c.ppo.gamma = p.value("gamma", c.ppo.gamma);
      c.ppo.gae_lambda = p.value("gae_lambda", c.ppo.gae_lambda);
      c.ppo.ppo_epochs = p.value("ppo_epochs", c.ppo.ppo_epochs);
      c.ppo.num_minibatches = p.value("num_minibatches", c.ppo.num_minibatches);
      c.ppo.clip_ratio = p.value("clip_ratio", c.ppo.clip_ratio);
      c.ppo.value_coef = p.value("value_coef", c.ppo.value_coef);
      c.ppo.entropy_coef = p.value("entropy_coef", c.ppo.entropy_coef);
      c.ppo.adam = p.value("adam", c.ppo.adam);
    }
    c.selector_passes = j.value("selector_passes", c.selector_passes);
    c.budget = j.value("budget", c.budget);
    c.rounds_max = j.value("rounds_max", c.rounds_max);
    c.patience = j.value("patience", c.patience);
    c.eval_metric = j.value("eval_metric", c.eval_metric);
    c.dim_hash = j.value("dim_hash", c.dim_hash);
    c.dim_embed = j.value("dim_embed", c.dim_embed);
    c.policy_hidden = j.value("policy_hidden", c.policy_hidden);
    if (j.contains("reward")) {
      c.reward.lambda1 = j.at("reward").value("lambda1", c.reward.lambda1);
      c.reward.lambda2 = j.at("reward").value("lambda2", c.reward.lambda2);
    }
    c.format.instruction = j.value("instruction", c.format.instruction);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid pipeline config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

PredictorParams pretrain_predictor(const Corpus& corpus, const DatasetSplit& split,
                                   const PipelineConfig& cfg, std::vector<std::size_t>* audit) {
  const auto train = positive_only(corpus, split.s_tra);
  if (train.empty()) throw DataError("pretrain_predictor: s_tra has no positive triples");
  auto params = init_predictor(corpus.num_types(), cfg.dim_hash, cfg.dim_embed,
                               derive_seed(cfg.seed, kPredictorInit));
  Optimizer opt(cfg.predictor);
  std::vector<HashedExample> examples(train.size());
  for (int epoch = 0; epoch < cfg.predictor.epochs; ++epoch) {
    parallel_for(train.size(), cfg.jobs, [&](std::size_t k) {
      const auto& t = corpus.triples()[train[k]];
      Rng rng(derive_seed(cfg.seed, kPretrainPrompt, epoch, train[k]));
      auto p = random_prompt(corpus.drug(t.u), corpus.drug(t.v), cfg.budget, rng, cfg.format);
      examples[k] = {token_hashes(p.render()), t.type};
    });
    OptConfig one = cfg.predictor;
    one.epochs = 1;
    one.seed = derive_seed(cfg.seed, kPretrain, epoch);
    params = train_predictor(examples, std::move(params), one, opt);
  }
  if (audit) audit->insert(audit->end(), train.begin(), train.end());
  return params;
}

PolicyParams init_selector(const PredictorParams& predictor, const PipelineConfig& cfg) {
  return init_policy(predictor.encoder, cfg.policy_hidden, derive_seed(cfg.seed, kPolicyInit));
}

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::selector: return "selector";
    case EvalMode::random: return "random";
    case EvalMode::truncated: return "truncated";
    case EvalMode::name_only: return "name_only";
  }
  return "?";
}

EvalMode eval_mode_from_string(std::string_view s) {
  if (s == "selector") return EvalMode::selector;
  if (s == "random") return EvalMode::random;
  if (s == "truncated") return EvalMode::truncated;
  if (s == "name_only") return EvalMode::name_only;
  throw DataError("unknown evaluation mode '" + std::string(s) + "'");
}

EvalOutput evaluate(const Corpus& corpus, std::span<const std::size_t> triples,
                    const PredictorParams& predictor, const PolicyParams* policy, EvalMode mode,
                    const PipelineConfig& cfg, std::uint64_t seed) {
  if (mode == EvalMode::selector && policy == nullptr) {
    throw DataError("selector evaluation needs a policy");
  }
  const bool multilabel = corpus.multilabel();
  std::vector<Triple> items;
  for (std::size_t t : triples) {
    const auto& tr = corpus.triples()[t];
    if (multilabel || tr.polarity == Polarity::positive) items.push_back(tr);
  }
  if (multilabel && std::none_of(items.begin(), items.end(), [](const Triple& t) {
        return t.polarity == Polarity::negative;
      })) {
    Rng rng(derive_seed(seed, kEvalNegatives));
    items = negative_sample(items, corpus, rng);
  }
  if (items.empty()) throw DataError("evaluate: no triples to score");

  EvalOutput out;
  out.prompts.resize(items.size());
  if (mode == EvalMode::selector) out.episodes.resize(items.size());
  std::vector<std::vector<double>> probs(items.size());
  RolloutOptions ro{cfg.budget, RolloutMode::greedy, cfg.reward, cfg.format};
  parallel_for(items.size(), cfg.jobs, [&](std::size_t k) {
    const auto& t = items[k];
    const Drug& u = corpus.drug(t.u);
    const Drug& v = corpus.drug(t.v);
    Prompt p;
    switch (mode) {
      case EvalMode::selector: {
        Rng unused(0);
        out.episodes[k] = rollout(u, v, t.type, *policy, predictor, ro, unused);
        p = out.episodes[k].final_prompt;
        break;
      }
      case EvalMode::random: {
        Rng rng(derive_seed(seed, kEvalRandom, k));
        p = random_prompt(u, v, cfg.budget, rng, cfg.format);
        break;
      }
      case EvalMode::truncated:
        p = truncated_prompt(u, v, cfg.budget, cfg.format);
        break;
      case EvalMode::name_only:
        p = Prompt::start(u, v, cfg.budget, cfg.format);
        break;
    }
    out.prompts[k] = p.render();
    probs[k] = predictor_forward(out.prompts[k], predictor);
  });

  const int n_types = static_cast<int>(corpus.num_types());
  if (!multilabel) {
    std::vector<int> pred, label;
    for (std::size_t k = 0; k < items.size(); ++k) {
      pred.push_back(static_cast<int>(
          std::max_element(probs[k].begin(), probs[k].end()) - probs[k].begin()));
      label.push_back(items[k].type);
    }
    out.report = multiclass_report(pred, label, n_types);
  } else {
    std::vector<double> scores;
    std::vector<int> types, labels;
    for (std::size_t k = 0; k < items.size(); ++k) {
      scores.push_back(probs[k][static_cast<std::size_t>(items[k].type)]);
      types.push_back(items[k].type);
      labels.push_back(items[k].polarity == Polarity::positive);
    }
    out.report = multilabel_report(scores, types, labels, n_types);
  }
  return out;
}

std::vector<HashedExample> selector_examples(const Corpus& corpus,
                                             std::span<const std::size_t> triples,
                                             const PolicyParams& policy,
                                             const PredictorParams& predictor,
                                             const PipelineConfig& cfg) {
  std::vector<HashedExample> out(triples.size());
  RolloutOptions ro{cfg.budget, RolloutMode::greedy, cfg.reward, cfg.format};
  parallel_for(triples.size(), cfg.jobs, [&](std::size_t k) {
    const auto& t = corpus.triples()[triples[k]];
    Rng unused(0);
    auto ep = rollout(corpus.drug(t.u), corpus.drug(t.v), t.type, policy, predictor, ro, unused);
    out[k] = {token_hashes(ep.final_prompt.render()), t.type};
  });
  return out;
}

// ---------------------------------------------------------------------------

std::string RoundRecord::csv_header() {
  return "round,metric," + MetricReport::csv_header() + "," + UpdateTelemetry::csv_header();
}

std::string RoundRecord::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << round << ',' << metric << ',' << val.csv_row() << ',' << selector.csv_row();
  return os.str();
}

std::string history_csv(std::span<const RoundRecord> history) {
  std::string out = RoundRecord::csv_header() + "\n";
  for (const auto& r : history) out += r.csv_row() + "\n";
  return out;
}

namespace {

json record_to_json(const RoundRecord& r) {
  const auto& s = r.selector;
  return {{"round", r.round},
          {"metric", r.metric},
          {"val",
           {{"mode", r.val.mode == TaskMode::multiclass ? "multiclass" : "multilabel"},
            {"macro_f1", r.val.macro_f1},
            {"accuracy", r.val.accuracy},
            {"kappa", r.val.kappa},
            {"roc_auc", r.val.roc_auc},
            {"pr_auc", r.val.pr_auc},
            {"n_samples", r.val.n_samples}}},
          {"selector",
           {{"mean_reward", s.mean_reward},
            {"mean_episode_length", s.mean_episode_length},
            {"surrogate", s.surrogate},
            {"value_loss", s.value_loss},
            {"entropy", s.entropy},
            {"clip_fraction", s.clip_fraction},
            {"steps", s.steps},
            {"minibatches", s.minibatches}}}};
}

RoundRecord record_from_json(const json& j) {
  RoundRecord r;
  r.round = j.at("round").get<int>();
  r.metric = j.at("metric").get<double>();
  const auto& v = j.at("val");
  r.val.mode = v.at("mode") == "multiclass" ? TaskMode::multiclass : TaskMode::multilabel;
  r.val.macro_f1 = v.at("macro_f1");
  r.val.accuracy = v.at("accuracy");
  r.val.kappa = v.at("kappa");
  r.val.roc_auc = v.at("roc_auc");
  r.val.pr_auc = v.at("pr_auc");
  r.val.n_samples = v.at("n_samples");
  const auto& s = j.at("selector");
  r.selector.mean_reward = s.at("mean_reward");
  r.selector.mean_episode_length = s.at("mean_episode_length");
  r.selector.surrogate = s.at("surrogate");
  r.selector.value_loss = s.at("value_loss");
  r.selector.entropy = s.at("entropy");
  r.selector.clip_fraction = s.at("clip_fraction");
  r.selector.steps = s.at("steps");
  r.selector.minibatches = s.at("minibatches");
  return r;
}

struct RunState {
  int completed_round = -1;
  int best_round = 0;
  double best_metric = 0.0;
  int since_best = 0;
  bool finished = false;
  std::vector<RoundRecord> history;
  std::vector<std::size_t> audit;
};

class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "checkpoints");
  }

  std::filesystem::path predictor_path(int round) const {
    return root_ / "checkpoints" / ("round_" + std::to_string(round) + ".txe");
  }
  std::filesystem::path policy_path(int round) const {
    return root_ / "checkpoints" / ("round_" + std::to_string(round) + ".pol");
  }

  std::optional<RunState> load_state() const {
    const auto path = root_ / "state.json";
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
      auto j = json::parse(detail::read_file(path));
      RunState s;
      s.completed_round = j.at("completed_round");
      s.best_round = j.at("best_round");
      s.best_metric = j.at("best_metric");
      s.since_best = j.at("since_best");
      s.finished = j.at("finished");
      for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r));
      s.audit = j.at("audit").get<std::vector<std::size_t>>();
      return s;
    } catch (const json::exception& e) {
      throw DataError("corrupt run state " + path.string() + ": " + e.what());
    }
  }

  void save_round(const RunState& s, int round, const PredictorParams& pred,
                  const PolicyParams& pol, const std::string& telemetry) const {
    save_predictor(pred, predictor_path(round));
    save_policy(pol, policy_path(round));
    detail::write_file(root_ / "history.csv", history_csv(s.history));
    detail::write_file(root_ / "telemetry.csv", telemetry);
    json hist = json::array();
    for (const auto& r : s.history) hist.push_back(record_to_json(r));
    json j = {{"completed_round", s.completed_round}, {"best_round", s.best_round},
              {"best_metric", s.best_metric},         {"since_best", s.since_best},
              {"finished", s.finished},               {"history", hist},
              {"audit", s.audit}};
    // Written last: a round counts as complete only once its state is on disk.
    const auto tmp = root_ / "state.json.tmp";
    detail::write_file(tmp, j.dump(1));
    std::filesystem::rename(tmp, root_ / "state.json");
  }

  std::string read_telemetry() const {
    const auto path = root_ / "telemetry.csv";
    return std::filesystem::exists(path) ? detail::read_file(path) : std::string{};
  }

 private:
  std::filesystem::path root_;
};

void add_audit(std::vector<std::size_t>& audit, std::span<const std::size_t> idx) {
  std::set<std::size_t> merged(audit.begin(), audit.end());
  merged.insert(idx.begin(), idx.end());
  audit.assign(merged.begin(), merged.end());
}

}  // namespace

PipelineResult run_pipeline(const Corpus& corpus, const DatasetSplit& split,
                            const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& run_dir) {
  cfg.validate();
  const auto train = positive_only(corpus, split.s_tra);
  if (train.empty()) throw DataError("run_pipeline: s_tra has no positive triples");
  if (split.s_val.empty()) throw DataError("run_pipeline: s_val is empty");
  const bool pr = use_pr_auc(corpus, cfg);
  auto metric_of = [&](const MetricReport& r) { return pr ? r.pr_auc : r.macro_f1; };
  auto validate_now = [&](const PredictorParams& pred, const PolicyParams& pol, int round) {
    RoundRecord rec;
    rec.round = round;
    rec.val = evaluate(corpus, split.s_val, pred, &pol, EvalMode::selector, cfg,
                       derive_seed(cfg.seed, kEvalRandom, round))
                  .report;
    rec.metric = metric_of(rec.val);
    return rec;
  };

  std::optional<RunDir> dir;
  if (run_dir) dir.emplace(*run_dir);
  std::string telemetry = UpdateTelemetry::csv_header();
  telemetry = "round,pass,update," + telemetry + "\n";

  PipelineResult res;
  RunState state;
  PredictorParams pred;
  PolicyParams pol;
  bool resumed = false;
  if (dir) {
    if (auto s = dir->load_state()) {
      state = std::move(*s);
      pred = load_predictor(dir->predictor_path(state.completed_round));
      pol = load_policy(dir->policy_path(state.completed_round));
      res.pretrained = load_predictor(dir->predictor_path(0));
      res.predictor = load_predictor(dir->predictor_path(state.best_round));
      res.policy = load_policy(dir->policy_path(state.best_round));
      telemetry = dir->read_telemetry();
      resumed = true;
    }
  }
  if (!resumed) {
    pred = pretrain_predictor(corpus, split, cfg);
    add_audit(state.audit, train);
    res.pretrained = pred;
    pol = init_selector(pred, cfg);
    auto rec = validate_now(pred, pol, 0);
    state.history.push_back(rec);
    state.completed_round = 0;
    state.best_round = 0;
    state.best_metric = rec.metric;
    res.predictor = pred;
    res.policy = pol;
    if (dir) dir->save_round(state, 0, pred, pol, telemetry);
  }

  RolloutOptions sample_opts{cfg.budget, RolloutMode::sample, cfg.reward, cfg.format};
  for (int round = state.completed_round + 1; round <= cfg.rounds_max && !state.finished;
       ++round) {
    // Selector phase: predictor frozen, PPO on sampled rollouts over s_tra.
    UpdateTelemetry round_tel;
    std::size_t n_updates = 0;
    std::ostringstream tel_rows;
    tel_rows.precision(17);
    for (int pass = 0; pass < cfg.selector_passes; ++pass) {
      std::vector<std::size_t> order = train;
      Rng order_rng(derive_seed(cfg.seed, kSelectorOrder, round, pass));
      shuffle_in_place(order, order_rng);
      for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.ppo.batch_size, ++b) {
        const std::size_t end = std::min(order.size(), start + cfg.ppo.batch_size);
        std::vector<Episode> episodes(end - start);
        parallel_for(episodes.size(), cfg.jobs, [&](std::size_t k) {
          const auto& t = corpus.triples()[order[start + k]];
          Rng rng(derive_seed(cfg.seed, kRollout, round, pass, order[start + k]));
          episodes[k] = rollout(corpus.drug(t.u), corpus.drug(t.v), t.type, pol, pred,
                                sample_opts, rng);
        });
        UpdateTelemetry tel;
        pol = ppo_update(episodes, std::move(pol), cfg.ppo,
                         derive_seed(cfg.seed, kPpo, round, pass, b), &tel);
        tel_rows << round << ',' << pass << ',' << b << ',' << tel.csv_row() << '\n';
        round_tel.mean_reward += tel.mean_reward;
        round_tel.mean_episode_length += tel.mean_episode_length;
        round_tel.surrogate += tel.surrogate;
        round_tel.value_loss += tel.value_loss;
        round_tel.entropy += tel.entropy;
        round_tel.clip_fraction += tel.clip_fraction;
        round_tel.steps += tel.steps;
        round_tel.minibatches += tel.minibatches;
        ++n_updates;
      }
    }
    if (n_updates > 0) {
      const double m = static_cast<double>(n_updates);
      round_tel.mean_reward /= m;
      round_tel.mean_episode_length /= m;
      round_tel.surrogate /= m;
      round_tel.value_loss /= m;
      round_tel.entropy /= m;
      round_tel.clip_fraction /= m;
    }
    telemetry += tel_rows.str();

    // Predictor phase: fine-tune on greedy selector prompts.
    if (cfg.predictor_round_epochs > 0) {
      auto examples = selector_examples(corpus, train, pol, pred, cfg);
      OptConfig oc = cfg.predictor;
      oc.epochs = cfg.predictor_round_epochs;
      oc.seed = derive_seed(cfg.seed, kRoundPredictor, round);
      pred = train_predictor(examples, std::move(pred), oc);
    }

    auto rec = validate_now(pred, pol, round);
    rec.selector = round_tel;
    state.history.push_back(rec);
    state.completed_round = round;
    if (rec.metric > state.best_metric) {
      state.best_metric = rec.metric;
      state.best_round = round;
      state.since_best = 0;
      res.predictor = pred;
      res.policy = pol;
    } else if (++state.since_best >= cfg.patience) {
      state.finished = true;
    }
    if (dir) dir->save_round(state, round, pred, pol, telemetry);
  }

  res.history = state.history;
  res.best_round = state.best_round;
  res.trained_triples = state.audit;
  return res;
}

}  // namespace textddi
