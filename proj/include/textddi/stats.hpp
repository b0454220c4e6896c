#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textddi/corpus.hpp"
#include "textddi/prompt.hpp"

namespace textddi {

struct LengthSummary {
  std::size_t count = 0;
  int max = 0;
  double mean = 0.0;
};

/// Token lengths of every drug description and of the full (unbudgeted)
/// prompt of every triple's pair.
struct CorpusStats {
  std::vector<int> drug_lengths;  // corpus drug order
  std::vector<int> pair_lengths;  // corpus triple order
  int bucket = 64;

  std::map<int, std::size_t> drug_histogram() const;
  std::map<int, std::size_t> pair_histogram() const;
  nlohmann::json summary() const;
};

CorpusStats corpus_stats(const Corpus& corpus, const PromptFormat& format = {}, int bucket = 64);

/// bucket_start -> count, buckets [k*bucket, (k+1)*bucket).
std::map<int, std::size_t> histogram(std::span<const int> values, int bucket);
std::string histogram_csv(const std::map<int, std::size_t>& hist);
LengthSummary summarize(std::span<const int> values);

}  // namespace textddi
