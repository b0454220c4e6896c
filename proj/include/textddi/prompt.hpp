#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "textddi/common.hpp"
#include "textddi/corpus.hpp"

namespace textddi {

inline constexpr int kDefaultBudget = 256;

struct PromptFormat {
  // #Drug1 / #Drug2 are replaced by the drug names.
  std::string instruction =
      "In the above context, we can predict that the drug-drug interaction between #Drug1 "
      "and #Drug2 is that:";
};

struct SentenceRef {
  std::string drug_id;
  int index = 0;
  auto operator<=>(const SentenceRef&) const = default;
};

/// Token-budgeted prompt for a drug pair:
///   [CLS] u_name: <u sentences> v_name: <v sentences> <instruction> [SEP]
/// Immutable; appending returns a new value. token_length() always equals
/// token_count(render()) and never exceeds budget().
class Prompt {
 public:
  /// The empty-selection prompt p_0. Throws DataError if even p_0 exceeds
  /// the budget.
  static Prompt start(const Drug& u, const Drug& v, int budget, const PromptFormat& format = {});

  const std::string& u_id() const { return u_id_; }
  const std::string& v_id() const { return v_id_; }
  const std::string& u_name() const { return u_name_; }
  const std::string& v_name() const { return v_name_; }
  const std::string& instruction() const { return instruction_; }
  const std::vector<Sentence>& u_sel() const { return u_sel_; }
  const std::vector<Sentence>& v_sel() const { return v_sel_; }
  int budget() const { return budget_; }
  int token_length() const { return token_length_; }
  std::size_t num_selected() const { return u_sel_.size() + v_sel_.size(); }
  bool contains(const SentenceRef& ref) const;

  std::string render() const;

 private:
  friend struct AppendResult try_append(const Prompt& prompt, const Sentence& sentence);

  std::string u_id_, v_id_, u_name_, v_name_, instruction_;
  std::vector<Sentence> u_sel_, v_sel_;
  int budget_ = kDefaultBudget;
  int token_length_ = 0;
};

std::string render(const Prompt& prompt);

struct AppendResult {
  Prompt prompt;
  bool accepted = false;
};

/// Appends the sentence when the result still fits the budget; otherwise
/// returns the input unchanged with accepted == false. Throws InvariantError
/// for a sentence of another drug or one that is already selected.
AppendResult try_append(const Prompt& prompt, const Sentence& sentence);

/// Uniformly random unselected sentences from both drugs, appended until the
/// first rejection or until no sentences remain.
Prompt random_prompt(const Drug& u, const Drug& v, int budget, Rng& rng,
                     const PromptFormat& format = {});

/// Sentences in description order, alternating u, v, u, v, ... until the
/// first rejection.
Prompt truncated_prompt(const Drug& u, const Drug& v, int budget,
                        const PromptFormat& format = {});

/// Token count of the pair's prompt holding every sentence of both drugs
/// (ignores the budget).
int full_prompt_length(const Drug& u, const Drug& v, const PromptFormat& format = {});

struct BudgetAudit {
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;
};

/// Process-wide count of prompts checked against their budget.
BudgetAudit budget_audit();
void reset_budget_audit();

}  // namespace textddi
