#pragma once

#include <string>
#include <vector>

#include "textddi/corpus.hpp"

namespace fixtures {

inline textddi::Drug make_drug(const std::string& id, const std::string& name, long rank,
                               const std::string& description) {
  textddi::Drug d;
  d.id = id;
  d.name = name;
  d.date_rank = rank;
  d.sentences = textddi::segment_sentences(description, id);
  return d;
}

inline std::vector<textddi::InteractionType> make_types(int n) {
  std::vector<textddi::InteractionType> types;
  for (int i = 0; i < n; ++i) {
    types.push_back({i, "#Drug1 may change the effect " + std::to_string(i) + " of #Drug2.",
                     "type " + std::to_string(i)});
  }
  return types;
}

// Drugs D0..D{n-1}, each with `sentences` short sentences, date_rank = index.
inline std::vector<textddi::Drug> make_drugs(int n, int sentences = 3) {
  std::vector<textddi::Drug> drugs;
  for (int i = 0; i < n; ++i) {
    std::string desc;
    for (int s = 0; s < sentences; ++s) {
      if (s) desc += " ";
      desc += "Drug" + std::to_string(i) + " fact number " + std::to_string(s) + ".";
    }
    drugs.push_back(make_drug("D" + std::to_string(i), "Name" + std::to_string(i), i, desc));
  }
  return drugs;
}

// Every unordered pair of n drugs interacts, type = (i + j) % n_types.
inline textddi::Corpus complete_corpus(int n, int n_types = 2, int sentences = 3) {
  std::vector<textddi::Triple> triples;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      triples.push_back({"D" + std::to_string(i), (i + j) % n_types, "D" + std::to_string(j),
                         textddi::Polarity::positive});
    }
  }
  return textddi::Corpus(make_drugs(n, sentences), make_types(n_types), triples);
}

}  // namespace fixtures
