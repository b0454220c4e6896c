// textddi: corpus tools, training, evaluation, prompt inspection, length ablation.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "textddi/stats.hpp"
#include "textddi/synth.hpp"
#include "textddi/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace textddi;

namespace {

json read_json(const fs::path& path) {
  try {
    return json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { detail::write_file(path, j.dump(2) + "\n"); }

// Applies "a.b=c" overrides to `j`. Keys must already exist so that typos
// fail before any work starts. Values parse as JSON, else as plain strings.
void apply_overrides(json& j, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw DataError("bad --set '" + s + "', expected key=value");
    const std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    json* node = &j;
    std::stringstream parts(key);
    for (std::string part; std::getline(parts, part, '.');) {
      if (!node->is_object() || !node->contains(part)) throw DataError("unknown config key '" + key + "'");
      node = &(*node)[part];
    }
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    if (node->is_number() && !value.is_number()) throw DataError("config key '" + key + "' expects a number");
    if (node->is_boolean() && !value.is_boolean()) throw DataError("config key '" + key + "' expects true/false");
    *node = value;
  }
}

struct ConfigArgs {
  std::string config;
  std::string preset = "default";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> budget;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "pipeline config JSON");
    app->add_option("--preset", preset, "base settings: default | synth")
        ->check(CLI::IsMember({"default", "synth"}));
    app->add_option("--set", sets, "dotted override, e.g. ppo.lr=0.001");
    app->add_option("--seed", seed);
    app->add_option("--jobs", jobs, "cap on rollout/evaluation threads");
    app->add_option("--budget,-L", budget, "prompt token budget");
  }

  PipelineConfig resolve() const {
    json j = (preset == "synth" ? PipelineConfig::synth_benchmark() : PipelineConfig()).to_json();
    if (!config.empty()) {
      json file = read_json(config);
      if (!file.is_object()) throw DataError(config + ": expected a JSON object");
      std::vector<std::string> flat;
      // reuse the override path so unknown keys in the file are rejected too
      std::function<void(const json&, const std::string&)> walk = [&](const json& n, const std::string& prefix) {
        for (auto it = n.begin(); it != n.end(); ++it) {
          const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
          if (it->is_object()) {
            walk(*it, key);
          } else {
            flat.push_back(key + "=" + it->dump());
          }
        }
      };
      walk(file, "");
      apply_overrides(j, flat);
    }
    apply_overrides(j, sets);
    auto cfg = PipelineConfig::from_json(j);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (budget) cfg.budget = *budget;
    cfg.validate();
    return cfg;
  }
};

std::pair<Corpus, DatasetSplit> load_data(const std::string& corpus_path, const std::string& split_path) {
  Corpus corpus = load_corpus(corpus_path);
  DatasetSplit split = split_from_json(corpus, read_json(split_path));
  check_split_invariants(corpus, split);
  return {std::move(corpus), std::move(split)};
}

std::span<const std::size_t> split_part(const DatasetSplit& split, const std::string& part) {
  if (part == "tra") return split.s_tra;
  if (part == "val") return split.s_val;
  if (part == "tst") return split.s_tst;
  throw DataError("unknown split part '" + part + "' (tra | val | tst)");
}

json episode_to_json(const Episode& ep, const SynthTruth* truth) {
  json steps = json::array();
  for (const auto& s : ep.steps) {
    json step = {{"drug", s.action.drug_id}, {"sentence", s.action.index}, {"text", s.action_text},
                 {"log_prob", s.log_prob},   {"value", s.value},           {"q", s.q},
                 {"reward", s.reward}};
    if (truth) step["signal"] = truth->is_signal(s.action);
    steps.push_back(step);
  }
  return {{"u", ep.u},
          {"v", ep.v},
          {"type", ep.type},
          {"q0", ep.q0},
          {"steps", steps},
          {"prompt", ep.final_prompt.render()},
          {"token_length", ep.final_prompt.token_length()}};
}

// ---------------------------------------------------------------------------

int cmd_synth(const SynthConfig& base, const std::string& config, const std::vector<std::string>& sets,
              std::optional<std::uint64_t> seed, const std::string& out, const std::string& truth_out) {
  json j = base.to_json();
  if (!config.empty()) j.merge_patch(read_json(config));
  apply_overrides(j, sets);
  SynthConfig cfg = SynthConfig::from_json(j);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  auto synth = generate(cfg);
  save_corpus(synth.corpus, out);
  write_json(truth_out, synth.truth.to_json());
  std::cout << "wrote " << synth.corpus.drugs().size() << " drugs, " << synth.corpus.triples().size()
            << " triples to " << out << "\n";
  return 0;
}

int cmd_split(const std::string& corpus_path, const SplitOptions& opt, const std::string& out) {
  Corpus corpus = load_corpus(corpus_path);
  auto split = make_split(corpus, opt);
  check_split_invariants(corpus, split);
  write_json(out, split_to_json(corpus, split));
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << to_string(split.mode) << ": tra " << split.s_tra.size() << ", val " << split.s_val.size()
            << ", tst " << split.s_tst.size() << " triples\n";
  return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& out_dir, int bucket,
              const PromptFormat& format) {
  Corpus corpus = load_corpus(corpus_path);
  const auto st = corpus_stats(corpus, format, bucket);
  fs::create_directories(out_dir);
  detail::write_file(fs::path(out_dir) / "drug_lengths.csv", histogram_csv(st.drug_histogram()));
  detail::write_file(fs::path(out_dir) / "pair_lengths.csv", histogram_csv(st.pair_histogram()));
  write_json(fs::path(out_dir) / "summary.json", st.summary());
  std::cout << st.summary().dump() << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& split_path, const PipelineConfig& cfg,
              const fs::path& run_dir) {
  auto [corpus, split] = load_data(corpus_path, split_path);
  fs::create_directories(run_dir);
  const json frozen = cfg.to_json();
  const auto config_path = run_dir / "config.json";
  if (fs::exists(config_path) && read_json(config_path) != frozen) {
    throw DataError(run_dir.string() + " holds a run with a different config; use a fresh run directory");
  }
  write_json(config_path, frozen);
  write_json(run_dir / "split.json", split_to_json(corpus, split));
  fs::remove(run_dir / "FAILED");
  try {
    auto res = run_pipeline(corpus, split, cfg, run_dir);
    save_predictor(res.predictor, run_dir / "predictor.txe");
    save_policy(res.policy, run_dir / "policy.pol");
    for (const auto& r : res.history) {
      std::printf("round %d  val %s %.4f\n", r.round, r.val.mode == TaskMode::multiclass ? "macro_f1" : "pr_auc",
                  r.metric);
    }
    std::printf("best round %d\n", res.best_round);
  } catch (const std::exception& e) {
    detail::write_file(run_dir / "FAILED", std::string(e.what()) + "\n");
    throw;
  }
  return 0;
}

struct RunModels {
  PipelineConfig cfg;
  PredictorParams predictor;
  PolicyParams policy;
};

RunModels load_run(const fs::path& run_dir) {
  if (fs::exists(run_dir / "FAILED")) throw DataError(run_dir.string() + " is marked FAILED");
  RunModels m;
  m.cfg = PipelineConfig::from_json(read_json(run_dir / "config.json"));
  m.predictor = load_predictor(run_dir / "predictor.txe");
  m.policy = load_policy(run_dir / "policy.pol");
  return m;
}

int cmd_eval(const fs::path& run_dir, const std::string& corpus_path, std::string split_path,
             const std::string& mode_name, const std::string& part, std::uint64_t seed,
             std::optional<int> jobs, bool pretrained, std::string out) {
  if (split_path.empty()) split_path = (run_dir / "split.json").string();
  auto [corpus, split] = load_data(corpus_path, split_path);
  auto m = load_run(run_dir);
  if (pretrained) m.predictor = load_predictor(run_dir / "checkpoints" / "round_0.txe");
  if (jobs) m.cfg.jobs = *jobs;
  const EvalMode mode = eval_mode_from_string(mode_name);
  auto res = evaluate(corpus, split_part(split, part), m.predictor, &m.policy, mode, m.cfg, seed);
  json j = res.report.to_json();
  j["eval_mode"] = mode_name;
  j["part"] = part;
  j["seed"] = seed;
  j["predictor"] = pretrained ? "pretrained" : "final";
  if (out.empty()) {
    out = (run_dir / ("eval_" + mode_name + (pretrained ? "_pretrained_" : "_") + part + ".json")).string();
  }
  write_json(out, j);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_select(const fs::path& run_dir, const std::string& corpus_path, const std::string& pair,
               std::optional<int> type, std::uint64_t seed, const std::string& truth_path,
               const std::string& out) {
  Corpus corpus = load_corpus(corpus_path);
  auto m = load_run(run_dir);
  const auto comma = pair.find(',');
  if (comma == std::string::npos) throw DataError("--pair expects U,V drug ids");
  const std::string u = pair.substr(0, comma), v = pair.substr(comma + 1);
  const Drug& du = corpus.drug(u);
  const Drug& dv = corpus.drug(v);
  if (!type) {
    for (const auto& t : corpus.triples()) {
      if (t.u == u && t.v == v && t.polarity == Polarity::positive) {
        type = t.type;
        break;
      }
    }
  }
  if (!type) throw DataError("no positive triple for " + pair + "; pass --type");
  std::optional<SynthTruth> truth;
  if (!truth_path.empty()) truth = SynthTruth::from_json(read_json(truth_path));
  auto mark = [&](const std::string& drug, int index) {
    return truth && truth->is_signal({drug, index}) ? "*" : " ";
  };

  Rng rng(derive_seed(seed, 0x73656c));
  Prompt rnd = random_prompt(du, dv, m.cfg.budget, rng, m.cfg.format);
  const double q_rnd = quality(predictor_forward(rnd.render(), m.predictor), *type, m.cfg.reward);
  RolloutOptions ro{m.cfg.budget, RolloutMode::greedy, m.cfg.reward, m.cfg.format};
  Episode ep = rollout(du, dv, *type, m.policy, m.predictor, ro, rng);

  std::printf("pair %s (%s) / %s (%s), type %d, L = %d\n", u.c_str(), du.name.c_str(), v.c_str(),
              dv.name.c_str(), *type, m.cfg.budget);
  std::printf("\nrandom prompt  [%d tokens, q = %.4f]\n", rnd.token_length(), q_rnd);
  for (const auto* sel : {&rnd.u_sel(), &rnd.v_sel()}) {
    for (const auto& s : *sel) std::printf("  %s %s[%d] %s\n", mark(s.drug_id, s.index), s.drug_id.c_str(), s.index, s.text.c_str());
  }
  std::printf("\nselector prompt  [%d tokens, q0 = %.4f]\n", ep.final_prompt.token_length(), ep.q0);
  for (const auto& s : ep.steps) {
    std::printf("  %s %s[%d] q = %.4f  R = %+.4f  %s\n", mark(s.action.drug_id, s.action.index),
                s.action.drug_id.c_str(), s.action.index, s.q, s.reward, s.action_text.c_str());
  }
  if (truth) std::printf("\n* marks signal sentences\n");
  std::printf("\n%s\n", ep.final_prompt.render().c_str());
  if (!out.empty()) {
    json j = {{"random", {{"prompt", rnd.render()}, {"q", q_rnd}, {"token_length", rnd.token_length()}}},
              {"selector", episode_to_json(ep, truth ? &*truth : nullptr)}};
    write_json(out, j);
  }
  return 0;
}

int cmd_ablate(const std::string& corpus_path, const std::string& split_path, const PipelineConfig& base,
               const std::vector<int>& budgets, const std::string& part, const fs::path& out_dir) {
  auto [corpus, split] = load_data(corpus_path, split_path);
  fs::create_directories(out_dir);
  std::string metrics = "budget,selector_macro_f1,selector_pr_auc,random_macro_f1,random_pr_auc,best_round\n";
  std::string timing = "budget,seconds\n";
  for (int L : budgets) {
    PipelineConfig cfg = base;
    cfg.budget = L;
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto res = run_pipeline(corpus, split, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto sel = evaluate(corpus, split_part(split, part), res.predictor, &res.policy, EvalMode::selector, cfg, cfg.seed);
    auto rnd = evaluate(corpus, split_part(split, part), res.pretrained, nullptr, EvalMode::random, cfg, cfg.seed);
    std::ostringstream row;
    row.precision(17);
    row << L << ',' << sel.report.macro_f1 << ',' << sel.report.pr_auc << ',' << rnd.report.macro_f1 << ','
        << rnd.report.pr_auc << ',' << res.best_round << '\n';
    metrics += row.str();
    timing += std::to_string(L) + "," + std::to_string(secs) + "\n";
    std::printf("L = %d  selector %.4f  random %.4f  (%.1fs)\n", L, sel.report.primary(), rnd.report.primary(), secs);
    detail::write_file(out_dir / "ablation.csv", metrics);
    detail::write_file(out_dir / "ablation_seconds.csv", timing);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TextDDI: budgeted sentence selection for drug-drug interaction prediction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and its ground truth");
  SynthConfig synth_defaults;
  std::string synth_config, synth_out = "corpus.jsonl", synth_truth = "truth.json";
  std::vector<std::string> synth_sets;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "SynthConfig JSON");
  synth->add_option("--set", synth_sets, "override, e.g. n_drugs=80");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out,-o", synth_out);
  synth->add_option("--truth", synth_truth);

  // split
  auto* split = app.add_subcommand("split", "write a split manifest");
  std::string split_corpus, split_out = "split.json", split_mode = "zero_shot";
  SplitOptions split_opt;
  split->add_option("--corpus", split_corpus)->required();
  split->add_option("--mode", split_mode)->check(CLI::IsMember({"zero_shot", "few_shot", "vanilla"}));
  split->add_option("--val", split_opt.val_fraction);
  split->add_option("--tst", split_opt.tst_fraction);
  split->add_option("--k", split_opt.k, "few-shot triples per new drug");
  split->add_option("--seed", split_opt.seed);
  split->add_option("--out,-o", split_out);

  // stats
  auto* stats = app.add_subcommand("stats", "token-length histograms of descriptions and full pair prompts");
  std::string stats_corpus, stats_out = "stats";
  int stats_bucket = 64;
  stats->add_option("--corpus", stats_corpus)->required();
  stats->add_option("--out-dir,-o", stats_out);
  stats->add_option("--bucket", stats_bucket);

  // train
  auto* train = app.add_subcommand("train", "run the alternating pipeline into a run directory");
  std::string train_corpus, train_split, train_dir;
  ConfigArgs train_cfg;
  train->add_option("--corpus", train_corpus)->required();
  train->add_option("--split", train_split)->required();
  train->add_option("--run-dir", train_dir)->required();
  train_cfg.add_to(train);

  // eval
  auto* eval = app.add_subcommand("eval", "score a trained run on a split part");
  std::string eval_dir, eval_corpus, eval_split, eval_mode = "selector", eval_part = "tst", eval_out;
  std::uint64_t eval_seed = 0;
  std::optional<int> eval_jobs;
  bool eval_pretrained = false;
  eval->add_option("--run-dir", eval_dir)->required();
  eval->add_option("--corpus", eval_corpus)->required();
  eval->add_option("--split", eval_split, "defaults to the run's split.json");
  eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"selector", "random", "truncated", "name_only"}));
  eval->add_option("--part", eval_part)->check(CLI::IsMember({"tra", "val", "tst"}));
  eval->add_option("--seed", eval_seed);
  eval->add_option("--jobs", eval_jobs);
  eval->add_flag("--pretrained", eval_pretrained, "score the round-0 predictor instead of the final one");
  eval->add_option("--out,-o", eval_out);

  // select
  auto* select = app.add_subcommand("select", "random vs selector prompt for one pair");
  std::string select_dir, select_corpus, select_pair, select_truth, select_out;
  std::optional<int> select_type;
  std::uint64_t select_seed = 0;
  select->add_option("--run-dir", select_dir)->required();
  select->add_option("--corpus", select_corpus)->required();
  select->add_option("--pair", select_pair, "U,V drug ids")->required();
  select->add_option("--type", select_type);
  select->add_option("--seed", select_seed);
  select->add_option("--truth", select_truth, "synthetic ground truth JSON");
  select->add_option("--out,-o", select_out, "episode JSON");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate per prompt budget");
  std::string ablate_corpus, ablate_split, ablate_out = "ablation", ablate_part = "tst";
  std::vector<int> ablate_budgets{32, 64, 128, 256};
  ConfigArgs ablate_cfg;
  ablate->add_option("--corpus", ablate_corpus)->required();
  ablate->add_option("--split", ablate_split)->required();
  ablate->add_option("--budgets", ablate_budgets)->delimiter(',');
  ablate->add_option("--part", ablate_part)->check(CLI::IsMember({"val", "tst"}));
  ablate->add_option("--out-dir,-o", ablate_out);
  ablate_cfg.add_to(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(synth_defaults, synth_config, synth_sets, synth_seed, synth_out, synth_truth);
    if (*split) {
      split_opt.mode = split_mode_from_string(split_mode);
      return cmd_split(split_corpus, split_opt, split_out);
    }
    if (*stats) return cmd_stats(stats_corpus, stats_out, stats_bucket, PromptFormat{});
    if (*train) return cmd_train(train_corpus, train_split, train_cfg.resolve(), train_dir);
    if (*eval) return cmd_eval(eval_dir, eval_corpus, eval_split, eval_mode, eval_part, eval_seed, eval_jobs, eval_pretrained, eval_out);
    if (*select) return cmd_select(select_dir, select_corpus, select_pair, select_type, select_seed, select_truth, select_out);
    if (*ablate) return cmd_ablate(ablate_corpus, ablate_split, ablate_cfg.resolve(), ablate_budgets, ablate_part, ablate_out);
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
