#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textddi/corpus.hpp"
#include "textddi/metrics.hpp"
#include "textddi/ppo.hpp"
#include "textddi/prompt.hpp"
#include "textddi/selector.hpp"
#include "textddi/textenc.hpp"

namespace textddi {

struct PipelineConfig {
  OptConfig predictor{};            // epochs = pretraining passes over s_tra
  int predictor_round_epochs = 1;   // passes per round on selector prompts
  PPOConfig ppo{};
  int selector_passes = 1;          // passes over s_tra per selector phase
  int budget = kDefaultBudget;
  int rounds_max = 2;
  int patience = 1;
  std::string eval_metric = "auto";  // auto | macro_f1 | pr_auc
  std::uint32_t dim_hash = 1u << 18;
  std::uint32_t dim_embed = 64;
  std::size_t policy_hidden = 32;
  RewardConfig reward{};
  PromptFormat format{};
  std::uint64_t seed = 0;
  int jobs = 1;

  PipelineConfig();  // predictor.epochs defaults to 5

  /// Desk-scale settings used for the synthetic benchmark.
  static PipelineConfig synth_benchmark();

  void validate() const;  // throws DataError
  nlohmann::json to_json() const;
  /// Starts from defaults and overrides the keys present in `j`.
  static PipelineConfig from_json(const nlohmann::json& j);
};

/// Fresh random prompt per training triple per epoch, then cross-entropy
/// training. Appends the trained triple indices to `audit` when given.
PredictorParams pretrain_predictor(const Corpus& corpus, const DatasetSplit& split,
                                   const PipelineConfig& cfg,
                                   std::vector<std::size_t>* audit = nullptr);

/// Copies the predictor encoder into a fresh selector.
PolicyParams init_selector(const PredictorParams& predictor, const PipelineConfig& cfg);

enum class EvalMode { selector, random, truncated, name_only };
std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(std::string_view s);

struct EvalOutput {
  MetricReport report;
  std::vector<Episode> episodes;  // selector mode only
  std::vector<std::string> prompts;
};

/// Builds one prompt per triple according to `mode` and scores the
/// predictor on them. Multi-label corpora are scored per type with
/// P(type | prompt); when `triples` hold no negatives, one seeded negative
/// per positive is drawn. `policy` is required in selector mode.
EvalOutput evaluate(const Corpus& corpus, std::span<const std::size_t> triples,
                    const PredictorParams& predictor, const PolicyParams* policy, EvalMode mode,
                    const PipelineConfig& cfg, std::uint64_t seed);

struct RoundRecord {
  int round = 0;  // 0 = after pretraining
  MetricReport val;
  double metric = 0.0;
  UpdateTelemetry selector;  // averaged over the round's PPO updates

  static std::string csv_header();
  std::string csv_row() const;
};

struct PipelineResult {
  PredictorParams predictor;  // best-validation checkpoint
  PolicyParams policy;
  PredictorParams pretrained;  // predictor right after pretraining
  std::vector<RoundRecord> history;  // round 0 plus one entry per executed round
  int best_round = 0;
  std::vector<std::size_t> trained_triples;  // audit log of triples used in updates
};

/// Alternates selector (PPO on sampled rollouts) and predictor (greedy
/// selector prompts) phases, evaluating on s_val after each round, and stops
/// after `patience` rounds without improvement or at rounds_max. With a run
/// directory, writes checkpoints/round_k.{txe,pol}, history.csv,
/// telemetry.csv and state.json, and resumes from them when present.
PipelineResult run_pipeline(const Corpus& corpus, const DatasetSplit& split,
                            const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& run_dir = std::nullopt);

/// Predictor prompts for training triples from greedy selector rollouts.
std::vector<HashedExample> selector_examples(const Corpus& corpus,
                                             std::span<const std::size_t> triples,
                                             const PolicyParams& policy,
                                             const PredictorParams& predictor,
                                             const PipelineConfig& cfg);

std::string history_csv(std::span<const RoundRecord> history);

}  // namespace textddi
