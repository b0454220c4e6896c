#include "textddi/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "textddi/common.hpp"
#include "textddi/tokenizer.hpp"

namespace textddi {

using nlohmann::json;

std::string Drug::description() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out.push_back(' ');
    out += s.text;
  }
  return out;
}

Corpus::Corpus(std::vector<Drug> drugs, std::vector<InteractionType> types,
               std::vector<Triple> triples)
    : drugs_(std::move(drugs)), types_(std::move(types)), triples_(std::move(triples)) {
  for (std::size_t k = 0; k < drugs_.size(); ++k) {
    if (!by_id_.emplace(drugs_[k].id, k).second) {
      throw DataError("duplicate drug id '" + drugs_[k].id + "'");
    }
  }
  std::sort(types_.begin(), types_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < types_.size(); ++k) {
    if (types_[k].id != static_cast<int>(k)) {
      throw DataError("interaction type ids must be dense from 0; missing or duplicate id near " +
                      std::to_string(types_[k].id));
    }
    const auto& t = types_[k].template_text;
    if (t.find("#Drug1") == std::string::npos || t.find("#Drug2") == std::string::npos) {
      throw DataError("template of type " + std::to_string(k) + " lacks #Drug1/#Drug2");
    }
  }
  std::map<std::pair<std::string, std::string>, int> positives;
  for (const auto& tr : triples_) {
    if (!by_id_.count(tr.u)) throw DataError("triple references unknown drug '" + tr.u + "'");
    if (!by_id_.count(tr.v)) throw DataError("triple references unknown drug '" + tr.v + "'");
    if (tr.u == tr.v) throw DataError("triple is a self-interaction of '" + tr.u + "'");
    if (tr.type < 0 || tr.type >= static_cast<int>(types_.size())) {
      throw DataError("triple (" + tr.u + ", " + tr.v + ") has invalid type " +
                      std::to_string(tr.type));
    }
    if (tr.polarity == Polarity::negative) {
      multilabel_ = true;
      continue;
    }
    auto key = std::minmax(tr.u, tr.v);
    if (++positives[{key.first, key.second}] > 1) multilabel_ = true;
  }
}

std::optional<std::size_t> Corpus::find_drug(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Drug& Corpus::drug(std::string_view id) const {
  auto k = find_drug(id);
  if (!k) throw DataError("unknown drug '" + std::string(id) + "'");
  return drugs_[*k];
}

std::vector<Sentence> segment_sentences(std::string_view raw_description,
                                        std::string_view drug_id) {
  const std::string text = normalize_whitespace(raw_description);
  std::vector<Sentence> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    if (end <= begin) return;
    Sentence s;
    s.drug_id = std::string(drug_id);
    s.index = static_cast<int>(out.size());
    s.text = text.substr(begin, end - begin);
    s.token_count = static_cast<int>(token_count(s.text));
    out.push_back(std::move(s));
  };
  const std::size_t n = text.size();
  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    bool boundary = false;
    if (i + 1 == n) {
      boundary = true;
    } else if (text[i + 1] == ' ' && i + 2 < n &&
               std::isupper(static_cast<unsigned char>(text[i + 2]))) {
      boundary = true;
    }
    if (!boundary) continue;
    emit(start, i + 1);
    start = i + 2;  // skip the single separating space
  }
  if (start < n) emit(start, n);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

template <typename T>
T required(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw DataError("line " + std::to_string(line) + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError("line " + std::to_string(line) + ": field '" + key + "' has wrong type");
  }
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl) {
  std::vector<Drug> drugs;
  std::vector<InteractionType> types;
  std::vector<Triple> triples;
  std::set<std::string> seen_ids;

  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError("line " + std::to_string(lineno) + ": not an object");
    const auto kind = required<std::string>(rec, "kind", lineno);
    if (kind == "drug") {
      Drug d;
      d.id = required<std::string>(rec, "id", lineno);
      d.name = required<std::string>(rec, "name", lineno);
      d.date_rank = required<std::int64_t>(rec, "date_rank", lineno);
      if (!seen_ids.insert(d.id).second) {
        throw DataError("line " + std::to_string(lineno) + ": duplicate drug id '" + d.id + "'");
      }
      d.sentences = segment_sentences(required<std::string>(rec, "description", lineno), d.id);
      drugs.push_back(std::move(d));
    } else if (kind == "type") {
      InteractionType t;
      t.id = required<int>(rec, "id", lineno);
      t.template_text = required<std::string>(rec, "template", lineno);
      t.definition = rec.value("definition", std::string{});
      types.push_back(std::move(t));
    } else if (kind == "triple") {
      Triple t;
      t.u = required<std::string>(rec, "u", lineno);
      t.type = required<int>(rec, "i", lineno);
      t.v = required<std::string>(rec, "v", lineno);
      const auto pol = rec.value("polarity", std::string("positive"));
      if (pol == "positive") {
        t.polarity = Polarity::positive;
      } else if (pol == "negative") {
        t.polarity = Polarity::negative;
      } else {
        throw DataError("line " + std::to_string(lineno) + ": bad polarity '" + pol + "'");
      }
      triples.push_back(std::move(t));
    } else {
      throw DataError("line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
  }
  return Corpus(std::move(drugs), std::move(types), std::move(triples));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.drugs()) {
    json j = {{"kind", "drug"},
              {"id", d.id},
              {"name", d.name},
              {"date_rank", d.date_rank},
              {"description", d.description()}};
    out += j.dump() + "\n";
  }
  for (const auto& t : corpus.types()) {
    json j = {{"kind", "type"},
              {"id", t.id},
              {"template", t.template_text},
              {"definition", t.definition}};
    out += j.dump() + "\n";
  }
  for (const auto& t : corpus.triples()) {
    json j = {{"kind", "triple"},
              {"u", t.u},
              {"i", t.type},
              {"v", t.v},
              {"polarity", t.polarity == Polarity::positive ? "positive" : "negative"}};
    out += j.dump() + "\n";
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << corpus_to_jsonl(corpus);
}

// ---------------------------------------------------------------------------
// Splits

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::zero_shot: return "zero_shot";
    case SplitMode::few_shot: return "few_shot";
    case SplitMode::vanilla: return "vanilla";
  }
  return "?";
}

SplitMode split_mode_from_string(std::string_view s) {
  if (s == "zero_shot") return SplitMode::zero_shot;
  if (s == "few_shot") return SplitMode::few_shot;
  if (s == "vanilla") return SplitMode::vanilla;
  throw DataError("unknown split mode '" + std::string(s) + "'");
}

namespace {

enum class Part : std::uint8_t { tra, val, tst };

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(fraction * static_cast<double>(n) + 0.5);
}

DatasetSplit zero_shot_split(const Corpus& corpus, const SplitOptions& opt) {
  std::vector<const Drug*> order;
  for (const auto& d : corpus.drugs()) order.push_back(&d);
  std::sort(order.begin(), order.end(), [](const Drug* a, const Drug* b) {
    if (a->date_rank != b->date_rank) return a->date_rank < b->date_rank;
    return a->id < b->id;
  });
  const std::size_t n = order.size();
  const std::size_t n_tst = fraction_count(opt.tst_fraction, n);
  const std::size_t n_val = fraction_count(opt.val_fraction, n);
  if (n_tst + n_val >= n) {
    throw DataError("split fractions leave no training drugs");
  }
  const std::size_t n_tra = n - n_tst - n_val;

  DatasetSplit split;
  split.mode = SplitMode::zero_shot;
  split.seed = opt.seed;
  std::unordered_map<std::string, Part> part;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& id = order[k]->id;
    if (k < n_tra) {
      split.d_tra.push_back(id);
      part[id] = Part::tra;
    } else if (k < n_tra + n_val) {
      split.d_val.push_back(id);
      part[id] = Part::val;
    } else {
      split.d_tst.push_back(id);
      part[id] = Part::tst;
    }
  }

  const auto& triples = corpus.triples();
  for (std::size_t t = 0; t < triples.size(); ++t) {
    Part pu = part.at(triples[t].u);
    Part pv = part.at(triples[t].v);
    auto in = [&](Part p, Part a, Part b) { return p == a || p == b; };
    if (pu == Part::tra && pv == Part::tra) {
      split.s_tra.push_back(t);
    } else if (in(pu, Part::tra, Part::val) && in(pv, Part::tra, Part::val)) {
      split.s_val.push_back(t);
    } else {
      // both ends in d_tra+d_tst, or a val-test pair
      split.s_tst.push_back(t);
    }
  }
  return split;
}

}  // namespace

DatasetSplit make_split(const Corpus& corpus, const SplitOptions& opt) {
  auto valid_fraction = [](double f) { return f >= 0.0 && f < 1.0; };
  if (!valid_fraction(opt.val_fraction) || !valid_fraction(opt.tst_fraction) ||
      opt.val_fraction + opt.tst_fraction >= 1.0) {
    throw DataError("split fractions must lie in [0,1) and sum below 1");
  }
  if (corpus.drugs().empty()) throw DataError("corpus has no drugs");

  if (opt.mode == SplitMode::vanilla) {
    DatasetSplit split;
    split.mode = SplitMode::vanilla;
    split.seed = opt.seed;
    for (const auto& d : corpus.drugs()) split.d_tra.push_back(d.id);
    std::vector<std::size_t> idx(corpus.triples().size());
    for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
    Rng rng(derive_seed(opt.seed, 0x7661));
    shuffle_in_place(idx, rng);
    const std::size_t n_val = fraction_count(opt.val_fraction, idx.size());
    const std::size_t n_tst = fraction_count(opt.tst_fraction, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k < n_val) {
        split.s_val.push_back(idx[k]);
      } else if (k < n_val + n_tst) {
        split.s_tst.push_back(idx[k]);
      } else {
        split.s_tra.push_back(idx[k]);
      }
    }
    std::sort(split.s_tra.begin(), split.s_tra.end());
    std::sort(split.s_val.begin(), split.s_val.end());
    std::sort(split.s_tst.begin(), split.s_tst.end());
    return split;
  }

  DatasetSplit split = zero_shot_split(corpus, opt);
  if (opt.mode == SplitMode::zero_shot) return split;

  split.mode = SplitMode::few_shot;
  split.k = opt.k;
  if (opt.k < 0) throw DataError("few-shot k must be non-negative");
  if (opt.k != 1 && opt.k != 3 && opt.k != 5) {
    split.warnings.push_back("few-shot k=" + std::to_string(opt.k) +
                             " differs from the usual 1/3/5 settings");
  }
  std::set<std::size_t> held(split.s_val.begin(), split.s_val.end());
  held.insert(split.s_tst.begin(), split.s_tst.end());
  std::set<std::size_t> moved;
  std::vector<std::string> new_drugs = split.d_val;
  new_drugs.insert(new_drugs.end(), split.d_tst.begin(), split.d_tst.end());
  const auto& triples = corpus.triples();
  for (std::size_t m = 0; m < new_drugs.size(); ++m) {
    const auto& id = new_drugs[m];
    std::vector<std::size_t> eligible;
    for (std::size_t t : held) {
      if (moved.count(t) || triples[t].polarity != Polarity::positive) continue;
      if (triples[t].u == id || triples[t].v == id) eligible.push_back(t);
    }
    Rng rng(derive_seed(opt.seed, 0x6673, m));
    shuffle_in_place(eligible, rng);
    const std::size_t take = std::min<std::size_t>(eligible.size(), opt.k);
    if (take < static_cast<std::size_t>(opt.k)) {
      split.warnings.push_back("drug '" + id + "' has only " + std::to_string(eligible.size()) +
                               " eligible triples for k=" + std::to_string(opt.k));
    }
    moved.insert(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take));
  }
  auto drop_moved = [&](std::vector<std::size_t>& v) {
    v.erase(std::remove_if(v.begin(), v.end(), [&](std::size_t t) { return moved.count(t) > 0; }),
            v.end());
  };
  drop_moved(split.s_val);
  drop_moved(split.s_tst);
  split.s_tra.insert(split.s_tra.end(), moved.begin(), moved.end());
  std::sort(split.s_tra.begin(), split.s_tra.end());
  return split;
}

void check_split_invariants(const Corpus& corpus, const DatasetSplit& split) {
  std::unordered_map<std::string, Part> part;
  auto assign = [&](const std::vector<std::string>& ids, Part p, const char* name) {
    for (const auto& id : ids) {
      if (!corpus.find_drug(id)) {
        throw InvariantError(std::string(name) + " contains unknown drug " + id);
      }
      if (!part.emplace(id, p).second) {
        throw InvariantError("drug " + id + " appears in more than one drug partition");
      }
    }
  };
  assign(split.d_tra, Part::tra, "d_tra");
  assign(split.d_val, Part::val, "d_val");
  assign(split.d_tst, Part::tst, "d_tst");
  if (part.size() != corpus.drugs().size()) {
    throw InvariantError("drug partitions do not cover every drug");
  }
  if (split.d_tra.empty()) throw InvariantError("d_tra is empty");

  std::vector<int> owner(corpus.triples().size(), -1);
  auto claim = [&](const std::vector<std::size_t>& v, int p) {
    for (std::size_t t : v) {
      if (t >= owner.size()) throw InvariantError("triple index out of range");
      if (owner[t] != -1) throw InvariantError("triple assigned to two partitions");
      owner[t] = p;
    }
  };
  claim(split.s_tra, 0);
  claim(split.s_val, 1);
  claim(split.s_tst, 2);

  if (split.mode == SplitMode::vanilla) {
    if (!split.d_val.empty() || !split.d_tst.empty()) {
      throw InvariantError("vanilla split must keep every drug in d_tra");
    }
    return;
  }
  const auto& triples = corpus.triples();
  for (std::size_t t = 0; t < triples.size(); ++t) {
    Part pu = part.at(triples[t].u);
    Part pv = part.at(triples[t].v);
    bool both_tra = pu == Part::tra && pv == Part::tra;
    bool in_val_side = pu != Part::tst && pv != Part::tst;
    switch (owner[t]) {
      case 0:
        if (split.mode == SplitMode::zero_shot && !both_tra) {
          throw InvariantError("training triple touches a new drug: " + triples[t].u + "-" +
                               triples[t].v);
        }
        break;
      case 1:
        if (both_tra || !in_val_side) throw InvariantError("validation triple violates membership");
        break;
      case 2:
        if (both_tra || (pu == Part::val && pv == Part::val)) {
          throw InvariantError("test triple violates membership");
        }
        break;
      default:
        if (split.mode != SplitMode::vanilla) {
          throw InvariantError("triple left unassigned by a drug-based split");
        }
    }
  }
}

json split_to_json(const Corpus& corpus, const DatasetSplit& split) {
  auto triples_json = [&](const std::vector<std::size_t>& v) {
    json arr = json::array();
    for (std::size_t t : v) {
      const auto& tr = corpus.triples()[t];
      arr.push_back(json::array(
          {tr.u, tr.type, tr.v, tr.polarity == Polarity::positive ? "positive" : "negative"}));
    }
    return arr;
  };
  json j;
  j["mode"] = to_string(split.mode);
  j["k"] = split.k;
  j["seed"] = split.seed;
  j["d_tra"] = split.d_tra;
  j["d_val"] = split.d_val;
  j["d_tst"] = split.d_tst;
  j["s_tra"] = triples_json(split.s_tra);
  j["s_val"] = triples_json(split.s_val);
  j["s_tst"] = triples_json(split.s_tst);
  return j;
}

DatasetSplit split_from_json(const Corpus& corpus, const json& j) {
  // Triples are matched by value; duplicates in the corpus are consumed in order.
  std::map<std::tuple<std::string, int, std::string, bool>, std::vector<std::size_t>> lookup;
  const auto& triples = corpus.triples();
  for (std::size_t t = triples.size(); t-- > 0;) {
    const auto& tr = triples[t];
    lookup[{tr.u, tr.type, tr.v, tr.polarity == Polarity::positive}].push_back(t);
  }
  auto read = [&](const char* key) {
    std::vector<std::size_t> out;
    for (const auto& e : j.at(key)) {
      if (!e.is_array() || e.size() != 4) throw DataError(std::string("bad triple entry in ") + key);
      auto it = lookup.find({e[0].get<std::string>(), e[1].get<int>(), e[2].get<std::string>(),
                             e[3].get<std::string>() == "positive"});
      if (it == lookup.end() || it->second.empty()) {
        throw DataError(std::string("split triple not in corpus: ") + e.dump());
      }
      out.push_back(it->second.back());
      it->second.pop_back();
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  DatasetSplit s;
  try {
    s.mode = split_mode_from_string(j.at("mode").get<std::string>());
    s.k = j.value("k", 0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.d_tra = j.at("d_tra").get<std::vector<std::string>>();
    s.d_val = j.at("d_val").get<std::vector<std::string>>();
    s.d_tst = j.at("d_tst").get<std::vector<std::string>>();
    s.s_tra = read("s_tra");
    s.s_val = read("s_val");
    s.s_tst = read("s_tst");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
  return s;
}

}  // namespace textddi
