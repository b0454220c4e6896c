#include "textddi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "textddi/tokenizer.hpp"

namespace textddi {
namespace {

constexpr const char* kSyllables[] = {"ba", "ce", "di", "fo", "gu", "ka", "le", "mi",
                                      "no", "pu", "ra", "se", "ti", "vo", "zu", "sha",
                                      "tre", "plo", "nim", "dax"};
constexpr std::size_t kNumSyllables = std::size(kSyllables);

// Distinct pseudo-word per index: two or three syllables.
std::string pseudo_word(std::size_t index) {
  std::string w;
  const std::size_t two = kNumSyllables * kNumSyllables;
  if (index < two) {
    w = std::string(kSyllables[index / kNumSyllables]) + kSyllables[index % kNumSyllables];
  } else {
    index -= two;
    w = std::string(kSyllables[(index / two) % kNumSyllables]) +
        kSyllables[(index / kNumSyllables) % kNumSyllables] + kSyllables[index % kNumSyllables] +
        "n";
  }
  return w;
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

class ZipfSampler {
 public:
  ZipfSampler(int n, double s) : cdf_(static_cast<std::size_t>(n)) {
    double acc = 0.0;
    for (int r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
      cdf_[static_cast<std::size_t>(r)] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

void SynthConfig::validate() const {
  if (n_drugs < 2) throw DataError("synth.n_drugs must be >= 2");
  if (n_types < 2) throw DataError("synth.n_types must be >= 2");
  if (n_keywords < n_types) throw DataError("synth.n_keywords must be >= n_types");
  if (signal_per_drug < 1) throw DataError("synth.signal_per_drug must be >= 1");
  if (noise_per_drug < 0) throw DataError("synth.noise_per_drug must be >= 0");
  if (sentence_len_tokens < 2) throw DataError("synth.sentence_len_tokens must be >= 2");
  if (!(pair_density > 0.0 && pair_density <= 1.0)) {
    throw DataError("synth.pair_density must lie in (0, 1]");
  }
  if (noise_vocab < 1 || noise_vocab > 4000) throw DataError("synth.noise_vocab must lie in [1, 4000]");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_drugs", n_drugs},
          {"n_types", n_types},
          {"n_keywords", n_keywords},
          {"signal_per_drug", signal_per_drug},
          {"noise_per_drug", noise_per_drug},
          {"sentence_len_tokens", sentence_len_tokens},
          {"pair_density", pair_density},
          {"noise_vocab", noise_vocab},
          {"zipf_exponent", zipf_exponent},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_drugs = j.value("n_drugs", c.n_drugs);
  c.n_types = j.value("n_types", c.n_types);
  c.n_keywords = j.value("n_keywords", c.n_keywords);
  c.signal_per_drug = j.value("signal_per_drug", c.signal_per_drug);
  c.noise_per_drug = j.value("noise_per_drug", c.noise_per_drug);
  c.sentence_len_tokens = j.value("sentence_len_tokens", c.sentence_len_tokens);
  c.pair_density = j.value("pair_density", c.pair_density);
  c.noise_vocab = j.value("noise_vocab", c.noise_vocab);
  c.zipf_exponent = j.value("zipf_exponent", c.zipf_exponent);
  c.seed = j.value("seed", c.seed);
  return c;
}

int SynthTruth::type_of(int class_u, int class_v) const {
  return keyword_type.at(static_cast<std::size_t>(std::max(class_u, class_v)));
}

bool SynthTruth::is_signal(const SentenceRef& ref) const {
  auto it = signal_indices.find(ref.drug_id);
  if (it == signal_indices.end()) {
    throw DataError("drug '" + ref.drug_id + "' is not part of the synthetic truth map");
  }
  return std::binary_search(it->second.begin(), it->second.end(), ref.index);
}

nlohmann::json SynthTruth::to_json() const {
  return {{"keywords", keywords},
          {"keyword_type", keyword_type},
          {"keyword_class", keyword_class},
          {"signal_indices", signal_indices}};
}

SynthTruth SynthTruth::from_json(const nlohmann::json& j) {
  SynthTruth t;
  try {
    t.keywords = j.at("keywords").get<std::vector<std::string>>();
    t.keyword_type = j.at("keyword_type").get<std::vector<int>>();
    t.keyword_class = j.at("keyword_class").get<std::map<std::string, int>>();
    t.signal_indices = j.at("signal_indices").get<std::map<std::string, std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed truth file: ") + e.what());
  }
  return t;
}

SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x73796e));
  SynthTruth truth;

  // Keyword k ranks above every k' < k; it maps to type k mod n_types.
  for (int k = 0; k < cfg.n_keywords; ++k) {
    truth.keywords.push_back(pseudo_word(static_cast<std::size_t>(k) * 7 + 3) + "ergic");
    truth.keyword_type.push_back(k % cfg.n_types);
  }
  std::vector<std::string> noise;
  for (int w = 0; w < cfg.noise_vocab; ++w) noise.push_back(pseudo_word(static_cast<std::size_t>(w)));
  ZipfSampler zipf(cfg.noise_vocab, cfg.zipf_exponent);

  std::vector<int> klass(static_cast<std::size_t>(cfg.n_drugs));
  for (int d = 0; d < cfg.n_drugs; ++d) klass[static_cast<std::size_t>(d)] = d % cfg.n_keywords;
  shuffle_in_place(klass, rng);
  std::vector<std::int64_t> date(static_cast<std::size_t>(cfg.n_drugs));
  std::iota(date.begin(), date.end(), 0);
  shuffle_in_place(date, rng);

  const int words = cfg.sentence_len_tokens - 1;
  const int per_drug = cfg.signal_per_drug + cfg.noise_per_drug;
  std::vector<Drug> drugs;
  for (int d = 0; d < cfg.n_drugs; ++d) {
    char id[16], name[16];
    std::snprintf(id, sizeof id, "SD%04d", d);
    std::snprintf(name, sizeof name, "Drug%03d", d);
    const int k = klass[static_cast<std::size_t>(d)];

    std::vector<bool> is_signal(static_cast<std::size_t>(per_drug), false);
    std::fill(is_signal.begin(), is_signal.begin() + cfg.signal_per_drug, true);
    shuffle_in_place(is_signal, rng);

    std::string description;
    std::vector<int> signal;
    for (int s = 0; s < per_drug; ++s) {
      std::vector<std::string> ws;
      for (int w = 0; w < words; ++w) ws.push_back(noise[zipf(rng)]);
      if (is_signal[static_cast<std::size_t>(s)]) {
        ws[uniform_index(rng, ws.size())] = truth.keywords[static_cast<std::size_t>(k)];
        signal.push_back(s);
      }
      ws.front() = capitalize(ws.front());
      std::string sentence;
      for (const auto& w : ws) sentence += (sentence.empty() ? "" : " ") + w;
      sentence += ".";
      description += (description.empty() ? "" : " ") + sentence;
    }

    Drug drug;
    drug.id = id;
    drug.name = name;
    drug.date_rank = date[static_cast<std::size_t>(d)];
    drug.sentences = segment_sentences(description, drug.id);
    if (static_cast<int>(drug.sentences.size()) != per_drug) {
      throw InvariantError("synthetic description did not segment into its sentences");
    }
    truth.keyword_class[drug.id] = k;
    truth.signal_indices[drug.id] = signal;
    drugs.push_back(std::move(drug));
  }

  std::vector<InteractionType> types;
  for (int t = 0; t < cfg.n_types; ++t) {
    types.push_back({t, "#Drug1 may interact with #Drug2 through synthetic mechanism " +
                            std::to_string(t) + ".",
                     "synthetic interaction class " + std::to_string(t)});
  }
  std::vector<Triple> triples;
  for (int a = 0; a < cfg.n_drugs; ++a) {
    for (int b = a + 1; b < cfg.n_drugs; ++b) {
      if (uniform01(rng) >= cfg.pair_density) continue;
      const int type = truth.type_of(klass[static_cast<std::size_t>(a)], klass[static_cast<std::size_t>(b)]);
      triples.push_back({drugs[static_cast<std::size_t>(a)].id, type,
                         drugs[static_cast<std::size_t>(b)].id, Polarity::positive});
    }
  }
  return {Corpus(std::move(drugs), std::move(types), std::move(triples)), std::move(truth)};
}

int synth_budget(const SynthCorpus& synth, int n_sentences, const PromptFormat& format) {
  const auto& drugs = synth.corpus.drugs();
  int overhead = 0;
  int sentence = 0;
  for (std::size_t a = 0; a < drugs.size(); ++a) {
    for (const auto& s : drugs[a].sentences) sentence = std::max(sentence, s.token_count);
    for (std::size_t b = 0; b < drugs.size(); ++b) {
      if (a == b) continue;
      overhead = std::max(overhead, Prompt::start(drugs[a], drugs[b], 1 << 30, format).token_length());
    }
  }
  return overhead + n_sentences * sentence;
}

double signal_selection_rate(std::span<const Episode> episodes, const SynthTruth& truth) {
  std::size_t selected = 0, hits = 0;
  for (const auto& ep : episodes) {
    if (!truth.signal_indices.count(ep.u) || !truth.signal_indices.count(ep.v)) {
      throw DataError("episode (" + ep.u + ", " + ep.v + ") is foreign to this synthetic corpus");
    }
    for (const auto& st : ep.steps) {
      ++selected;
      hits += truth.is_signal(st.action);
    }
  }
  if (selected == 0) throw DataError("signal selection rate undefined: no sentence selected");
  return static_cast<double>(hits) / static_cast<double>(selected);
}

}  // namespace textddi
