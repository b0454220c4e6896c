#include <doctest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "textddi/common.hpp"
#include "textddi/corpus.hpp"
#include "textddi/synth.hpp"
#include "textddi/tokenizer.hpp"

using namespace textddi;

namespace {

const char* kTinyCorpus =
    R"({"kind":"drug","id":"DB1","name":"Aspirin","date_rank":1,"description":"Aspirin is an NSAID. It inhibits COX."})"
    "\n"
    R"({"kind":"drug","id":"DB2","name":"Warfarin","date_rank":2,"description":"Warfarin is an anticoagulant."})"
    "\n"
    R"({"kind":"type","id":0,"template":"#Drug1 increases the bleeding risk of #Drug2.","definition":"bleeding"})"
    "\n"
    R"({"kind":"triple","u":"DB1","i":0,"v":"DB2","polarity":"positive"})"
    "\n";

}  // namespace

TEST_CASE("segment_sentences") {
  auto s = segment_sentences("A. B.");
  REQUIRE(s.size() == 2);
  CHECK(s[0].text == "A.");
  CHECK(s[1].text == "B.");
  CHECK(segment_sentences("Dose 2.5 mg daily.").size() == 1);
  CHECK(segment_sentences("").empty());
  // lowercase continuation is not a boundary
  CHECK(segment_sentences("Take with food. e.g. twice daily.").size() == 1);
  CHECK(segment_sentences("Stop! Really? Yes.").size() == 3);

  SUBCASE("indices, drug ids and token counts") {
    auto t = segment_sentences("First one here.  Second\n one.", "X");
    REQUIRE(t.size() == 2);
    CHECK(t[0].drug_id == "X");
    CHECK(t[1].index == 1);
    CHECK(t[0].token_count == 4);
    CHECK(t[1].text == "Second one.");
  }
}

TEST_CASE("segment then join reproduces the normalized description") {
  const std::vector<std::string> raw{
      "Aspirin  is an NSAID.\nIt inhibits COX-1 and COX-2.   Dose 2.5 mg.",
      "No terminal punctuation here", "Why? Because! It works.", " Trailing space. "};
  for (const auto& r : raw) {
    auto parts = segment_sentences(r);
    std::string joined;
    for (const auto& p : parts) {
      CHECK(p.token_count >= 1);
      CHECK(p.text.find('\n') == std::string::npos);
      joined += (joined.empty() ? "" : " ") + p.text;
    }
    CHECK(joined == normalize_whitespace(r));
  }
}

TEST_CASE("parse_corpus") {
  Corpus c = parse_corpus(kTinyCorpus);
  CHECK(c.drugs().size() == 2);
  CHECK(c.types().size() == 1);
  CHECK(c.triples().size() == 1);
  CHECK(c.drug("DB1").sentences.size() == 2);
  CHECK_FALSE(c.multilabel());

  SUBCASE("round trip through JSONL") {
    Corpus again = parse_corpus(corpus_to_jsonl(c));
    CHECK(corpus_to_jsonl(again) == corpus_to_jsonl(c));
  }
  SUBCASE("dangling reference names the id") {
    std::string bad = std::string(kTinyCorpus) +
                      R"({"kind":"triple","u":"DB1","i":0,"v":"DB9","polarity":"positive"})" "\n";
    try {
      parse_corpus(bad);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("DB9") != std::string::npos);
    }
  }
  SUBCASE("malformed line reports its number") {
    std::string bad = std::string(kTinyCorpus) + "{not json\n";
    try {
      parse_corpus(bad);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
  }
  SUBCASE("duplicate drug id") {
    std::string bad = std::string(kTinyCorpus) +
                      R"({"kind":"drug","id":"DB1","name":"Other","date_rank":3,"description":"X."})" "\n";
    CHECK_THROWS_AS(parse_corpus(bad), DataError);
  }
  SUBCASE("missing placeholder") {
    std::string bad = std::string(kTinyCorpus) +
                      R"({"kind":"type","id":1,"template":"#Drug1 only.","definition":"x"})" "\n";
    CHECK_THROWS_AS(parse_corpus(bad), DataError);
  }
}

TEST_CASE("multi-label detection") {
  auto drugs = fixtures::make_drugs(3);
  auto types = fixtures::make_types(2);
  Corpus single(drugs, types, {{"D0", 0, "D1", Polarity::positive}});
  CHECK_FALSE(single.multilabel());
  Corpus multi(drugs, types, {{"D0", 0, "D1", Polarity::positive}, {"D1", 1, "D0", Polarity::positive}});
  CHECK(multi.multilabel());
  CHECK_THROWS_AS(Corpus(drugs, types, {{"D0", 0, "D0", Polarity::positive}}), DataError);
  CHECK_THROWS_AS(Corpus(drugs, types, {{"D0", 5, "D1", Polarity::positive}}), DataError);
}

TEST_CASE("zero-shot split with no new drugs") {
  Corpus c = fixtures::complete_corpus(3);
  SplitOptions opt;
  opt.val_fraction = 0.1;
  opt.tst_fraction = 0.1;  // 0.3 drugs round to zero
  auto split = make_split(c, opt);
  CHECK(split.d_tra.size() == 3);
  CHECK(split.s_val.empty());
  CHECK(split.s_tst.empty());
  CHECK(split.s_tra.size() == 3);
  check_split_invariants(c, split);
}

TEST_CASE("zero-shot split matches brute-force membership on 6 drugs") {
  Corpus c = fixtures::complete_corpus(6);
  SplitOptions opt;
  opt.val_fraction = 1.0 / 6.0;
  opt.tst_fraction = 1.0 / 6.0;
  auto split = make_split(c, opt);
  // chronological: D0..D3 train, D4 val, D5 test
  CHECK(split.d_tra == std::vector<std::string>{"D0", "D1", "D2", "D3"});
  CHECK(split.d_val == std::vector<std::string>{"D4"});
  CHECK(split.d_tst == std::vector<std::string>{"D5"});

  const std::set<std::string> tra{"D0", "D1", "D2", "D3"}, val{"D4"}, tst{"D5"};
  std::vector<std::size_t> e_tra, e_val, e_tst;
  for (std::size_t t = 0; t < c.triples().size(); ++t) {
    const auto& tr = c.triples()[t];
    const bool u_tra = tra.count(tr.u), v_tra = tra.count(tr.v);
    const bool u_tv = u_tra || val.count(tr.u), v_tv = v_tra || val.count(tr.v);
    if (u_tra && v_tra) {
      e_tra.push_back(t);
    } else if (u_tv && v_tv) {
      e_val.push_back(t);
    } else {
      e_tst.push_back(t);  // includes the val-test pair
    }
  }
  CHECK(c.triples().size() == 15);
  CHECK(split.s_tra == e_tra);
  CHECK(split.s_val == e_val);
  CHECK(split.s_tst == e_tst);
  CHECK(e_tra.size() == 6);
  CHECK(e_val.size() == 4);
  CHECK(e_tst.size() == 5);
}

TEST_CASE("date_rank ties break by id") {
  auto drugs = fixtures::make_drugs(4);
  for (auto& d : drugs) d.date_rank = 7;
  std::swap(drugs[0], drugs[3]);
  Corpus c(drugs, fixtures::make_types(1), {});
  SplitOptions opt;
  opt.val_fraction = 0.25;
  opt.tst_fraction = 0.25;
  auto split = make_split(c, opt);
  CHECK(split.d_tra == std::vector<std::string>{"D0", "D1"});
  CHECK(split.d_val == std::vector<std::string>{"D2"});
  CHECK(split.d_tst == std::vector<std::string>{"D3"});
}

TEST_CASE("split errors") {
  Corpus c = fixtures::complete_corpus(4);
  SplitOptions opt;
  opt.val_fraction = 0.5;
  opt.tst_fraction = 0.5;
  CHECK_THROWS_AS(make_split(c, opt), DataError);
  opt.val_fraction = 0.4;
  opt.tst_fraction = 0.4;  // 2 + 2 of 4 drugs
  CHECK_THROWS_AS(make_split(c, opt), DataError);
}

TEST_CASE("few-shot moves at most k triples per new drug") {
  Corpus c = fixtures::complete_corpus(10, 3);
  SplitOptions zs;
  zs.val_fraction = 0.2;
  zs.tst_fraction = 0.2;
  zs.seed = 4;
  const auto base = make_split(c, zs);
  for (int k : {1, 3, 5}) {
    SplitOptions fs = zs;
    fs.mode = SplitMode::few_shot;
    fs.k = k;
    auto split = make_split(c, fs);
    check_split_invariants(c, split);
    CHECK(std::includes(split.s_tra.begin(), split.s_tra.end(), base.s_tra.begin(), base.s_tra.end()));
    std::vector<std::size_t> moved;
    std::set_difference(split.s_tra.begin(), split.s_tra.end(), base.s_tra.begin(), base.s_tra.end(),
                        std::back_inserter(moved));
    CHECK(moved.size() <= static_cast<std::size_t>(k) * 4);
    CHECK(moved.size() >= static_cast<std::size_t>(k));
    CHECK(split.s_tra.size() + split.s_val.size() + split.s_tst.size() == c.triples().size());
    CHECK(split.warnings.empty());
  }
  SUBCASE("unusual k warns") {
    SplitOptions fs = zs;
    fs.mode = SplitMode::few_shot;
    fs.k = 2;
    CHECK_FALSE(make_split(c, fs).warnings.empty());
  }
  SUBCASE("k beyond the available triples warns and moves all") {
    SplitOptions fs = zs;
    fs.mode = SplitMode::few_shot;
    fs.k = 50;
    auto split = make_split(c, fs);
    CHECK_FALSE(split.warnings.empty());
    check_split_invariants(c, split);
  }
}

TEST_CASE("vanilla split keeps all drugs in training") {
  Corpus c = fixtures::complete_corpus(8);
  SplitOptions opt;
  opt.mode = SplitMode::vanilla;
  opt.seed = 11;
  auto split = make_split(c, opt);
  check_split_invariants(c, split);
  CHECK(split.d_tra.size() == 8);
  CHECK(split.s_val.size() == 3);
  CHECK(split.s_tst.size() == 3);
  CHECK(split.s_tra.size() == 22);
}

TEST_CASE("split manifest is deterministic and round-trips") {
  SynthConfig sc;
  sc.n_drugs = 20;
  sc.seed = 2;
  auto sy = generate(sc);
  for (auto mode : {SplitMode::zero_shot, SplitMode::few_shot, SplitMode::vanilla}) {
    SplitOptions opt;
    opt.mode = mode;
    opt.seed = 9;
    auto a = split_to_json(sy.corpus, make_split(sy.corpus, opt)).dump();
    auto b = split_to_json(sy.corpus, make_split(sy.corpus, opt)).dump();
    CHECK(a == b);
    auto back = split_from_json(sy.corpus, nlohmann::json::parse(a));
    CHECK(split_to_json(sy.corpus, back).dump() == a);
  }
}

TEST_CASE("invariant checker rejects a leaking split") {
  Corpus c = fixtures::complete_corpus(6);
  SplitOptions opt;
  opt.val_fraction = 1.0 / 6.0;
  opt.tst_fraction = 1.0 / 6.0;
  auto split = make_split(c, opt);
  auto leaky = split;
  leaky.s_tra.push_back(leaky.s_tst.front());
  leaky.s_tst.erase(leaky.s_tst.begin());
  CHECK_THROWS_AS(check_split_invariants(c, leaky), InvariantError);
  auto dup = split;
  dup.s_val.push_back(dup.s_tra.front());
  CHECK_THROWS_AS(check_split_invariants(c, dup), InvariantError);
}
