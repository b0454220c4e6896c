#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textddi/corpus.hpp"
#include "textddi/prompt.hpp"
#include "textddi/selector.hpp"

namespace textddi {

/// Synthetic corpus with a planted signal: every drug carries a keyword
/// class, a few "signal" sentences contain that keyword and the rest are
/// Zipf noise. The interaction type of a pair is a fixed function of the
/// two keyword classes: the type attached to the higher-ranked keyword.
struct SynthConfig {
  int n_drugs = 60;
  int n_types = 8;
  int n_keywords = 8;
  int signal_per_drug = 2;
  int noise_per_drug = 18;
  int sentence_len_tokens = 12;  // includes the closing period
  double pair_density = 0.35;
  int noise_vocab = 200;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws DataError
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthTruth {
  std::vector<std::string> keywords;                       // keyword class -> token
  std::vector<int> keyword_type;                           // keyword class -> type id
  std::map<std::string, int> keyword_class;                // drug id -> class
  std::map<std::string, std::vector<int>> signal_indices;  // drug id -> sentence indices

  /// Type of a pair given both keyword classes.
  int type_of(int class_u, int class_v) const;
  bool is_signal(const SentenceRef& ref) const;  // throws DataError for unknown drugs

  nlohmann::json to_json() const;
  static SynthTruth from_json(const nlohmann::json& j);
};

struct SynthCorpus {
  Corpus corpus;
  SynthTruth truth;
};

SynthCorpus generate(const SynthConfig& cfg);

/// Smallest budget fitting every pair's empty prompt plus `n_sentences`
/// synthetic sentences (one sentence more never fits).
int synth_budget(const SynthCorpus& synth, int n_sentences, const PromptFormat& format = {});

/// Fraction of selected sentences (over all steps of all episodes) that are
/// signal sentences. Throws DataError when no sentence was selected or an
/// episode refers to drugs outside the truth map.
double signal_selection_rate(std::span<const Episode> episodes, const SynthTruth& truth);

}  // namespace textddi
