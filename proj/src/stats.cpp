#include "textddi/stats.hpp"

#include <algorithm>
#include <numeric>

#include "textddi/common.hpp"
#include "textddi/tokenizer.hpp"

namespace textddi {

std::map<int, std::size_t> histogram(std::span<const int> values, int bucket) {
  if (bucket < 1) throw DataError("histogram bucket must be positive");
  std::map<int, std::size_t> h;
  for (int v : values) ++h[(v / bucket) * bucket];
  return h;
}

std::string histogram_csv(const std::map<int, std::size_t>& hist) {
  std::string out = "bucket_start,count\n";
  for (const auto& [start, n] : hist) out += std::to_string(start) + "," + std::to_string(n) + "\n";
  return out;
}

LengthSummary summarize(std::span<const int> values) {
  LengthSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

CorpusStats corpus_stats(const Corpus& corpus, const PromptFormat& format, int bucket) {
  if (bucket < 1) throw DataError("histogram bucket must be positive");
  CorpusStats st;
  st.bucket = bucket;
  for (const auto& d : corpus.drugs()) st.drug_lengths.push_back(static_cast<int>(token_count(d.description())));
  for (const auto& t : corpus.triples()) {
    st.pair_lengths.push_back(full_prompt_length(corpus.drug(t.u), corpus.drug(t.v), format));
  }
  return st;
}

std::map<int, std::size_t> CorpusStats::drug_histogram() const { return histogram(drug_lengths, bucket); }
std::map<int, std::size_t> CorpusStats::pair_histogram() const { return histogram(pair_lengths, bucket); }

nlohmann::json CorpusStats::summary() const {
  auto one = [](const std::vector<int>& v) {
    const auto s = summarize(v);
    return nlohmann::json{{"count", s.count}, {"max", s.max}, {"mean", s.mean}};
  };
  return {{"bucket", bucket}, {"drug_tokens", one(drug_lengths)}, {"pair_prompt_tokens", one(pair_lengths)}};
}

}  // namespace textddi
