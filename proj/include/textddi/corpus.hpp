#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace textddi {

struct Sentence {
  std::string drug_id;
  int index = 0;
  std::string text;
  int token_count = 0;
};

struct Drug {
  std::string id;
  std::string name;
  std::int64_t date_rank = 0;
  std::vector<Sentence> sentences;

  std::string description() const;
};

struct InteractionType {
  int id = 0;
  std::string template_text;  // contains #Drug1 and #Drug2
  std::string definition;
};

enum class Polarity { positive, negative };

struct Triple {
  std::string u;
  int type = 0;
  std::string v;
  Polarity polarity = Polarity::positive;

  bool operator==(const Triple&) const = default;
};

/// Drugs, interaction types and interaction triples, with referential
/// integrity checked on construction.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DataError on duplicate drug ids, non-dense type ids, templates
  /// missing a placeholder, self-loops or dangling drug references.
  Corpus(std::vector<Drug> drugs, std::vector<InteractionType> types,
         std::vector<Triple> triples);

  const std::vector<Drug>& drugs() const { return drugs_; }
  const std::vector<InteractionType>& types() const { return types_; }
  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t num_types() const { return types_.size(); }

  std::optional<std::size_t> find_drug(std::string_view id) const;
  const Drug& drug(std::string_view id) const;  // throws DataError

  /// True when some unordered pair carries more than one positive triple or
  /// any negative triple is present (TWOSIDES-style multi-label task).
  bool multilabel() const { return multilabel_; }

 private:
  std::vector<Drug> drugs_;
  std::vector<InteractionType> types_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::size_t> by_id_;
  bool multilabel_ = false;
};

/// Splits on '.', '!' or '?' when followed by whitespace and an uppercase
/// letter, or by the end of the text. Whitespace is normalized first.
std::vector<Sentence> segment_sentences(std::string_view raw_description,
                                        std::string_view drug_id = {});

/// JSONL corpus: one record per line, discriminated by "kind"
/// (drug | type | triple). Errors name the offending line.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);
std::string corpus_to_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { zero_shot, few_shot, vanilla };

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(std::string_view s);

struct SplitOptions {
  SplitMode mode = SplitMode::zero_shot;
  double val_fraction = 0.1;
  double tst_fraction = 0.1;
  int k = 1;  // few-shot samples moved per new drug
  std::uint64_t seed = 0;
};

/// Drug partitions plus triple partitions (indices into Corpus::triples()).
struct DatasetSplit {
  SplitMode mode = SplitMode::zero_shot;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> d_tra, d_val, d_tst;
  std::vector<std::size_t> s_tra, s_val, s_tst;
  std::vector<std::string> warnings;
};

/// zero_shot: drugs sorted by (date_rank, id); the last tst_fraction become
/// test drugs, the preceding val_fraction validation drugs. A triple goes to
/// s_tra if both ends are training drugs, else to s_val if both ends are in
/// d_tra+d_val, else to s_tst (val-test pairs included).
/// few_shot: zero_shot, then k seeded triples of each new drug move to s_tra.
/// vanilla: seeded uniform split of triples; every drug is a training drug.
DatasetSplit make_split(const Corpus& corpus, const SplitOptions& options);

/// Throws InvariantError naming the first violated partition property.
void check_split_invariants(const Corpus& corpus, const DatasetSplit& split);

nlohmann::json split_to_json(const Corpus& corpus, const DatasetSplit& split);
DatasetSplit split_from_json(const Corpus& corpus, const nlohmann::json& j);

}  // namespace textddi
