#include "textddi/prompt.hpp"

#include <algorithm>
#include <atomic>

#include "textddi/tokenizer.hpp"

namespace textddi {
namespace {

std::atomic<std::uint64_t> g_checked{0};
std::atomic<std::uint64_t> g_violations{0};

void audit(const Prompt& p) {
  g_checked.fetch_add(1, std::memory_order_relaxed);
  const int actual = token_count(p.render());
  if (actual != p.token_length()) {
    throw InvariantError("prompt token count drifted: cached " + std::to_string(p.token_length()) +
                         ", rendered " + std::to_string(actual));
  }
  if (actual > p.budget()) {
    g_violations.fetch_add(1, std::memory_order_relaxed);
    throw InvariantError("prompt for (" + p.u_id() + ", " + p.v_id() + ") has " +
                         std::to_string(p.token_length()) + " tokens, budget " +
                         std::to_string(p.budget()));
  }
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

void append_joined(std::string& out, const std::vector<Sentence>& sel) {
  for (std::size_t k = 0; k < sel.size(); ++k) {
    if (k > 0) out.push_back(' ');
    out += sel[k].text;
  }
}

}  // namespace

Prompt Prompt::start(const Drug& u, const Drug& v, int budget, const PromptFormat& format) {
  Prompt p;
  p.u_id_ = u.id;
  p.v_id_ = v.id;
  p.u_name_ = u.name;
  p.v_name_ = v.name;
  p.instruction_ = substitute(substitute(format.instruction, "#Drug1", u.name), "#Drug2", v.name);
  p.budget_ = budget;
  p.token_length_ = static_cast<int>(token_count(p.render()));
  if (p.token_length_ > budget) {
    throw DataError("budget " + std::to_string(budget) + " is below the " +
                    std::to_string(p.token_length_) + "-token empty prompt of (" + u.id + ", " +
                    v.id + ")");
  }
  audit(p);
  return p;
}

bool Prompt::contains(const SentenceRef& ref) const {
  if (ref.drug_id != u_id_ && ref.drug_id != v_id_) return false;
  const auto& sel = ref.drug_id == u_id_ ? u_sel_ : v_sel_;
  return std::any_of(sel.begin(), sel.end(), [&](const Sentence& s) {
    return s.index == ref.index && s.drug_id == ref.drug_id;
  });
}

std::string Prompt::render() const {
  std::string out = "[CLS] ";
  out += u_name_;
  out += ": ";
  append_joined(out, u_sel_);
  out += ' ';
  out += v_name_;
  out += ": ";
  append_joined(out, v_sel_);
  if (!v_sel_.empty()) out += ' ';
  out += instruction_;
  out += " [SEP]";
  return out;
}

std::string render(const Prompt& prompt) { return prompt.render(); }

AppendResult try_append(const Prompt& prompt, const Sentence& sentence) {
  if (sentence.drug_id != prompt.u_id_ && sentence.drug_id != prompt.v_id_) {
    throw InvariantError("sentence of drug " + sentence.drug_id + " does not belong to pair (" +
                         prompt.u_id_ + ", " + prompt.v_id_ + ")");
  }
  if (prompt.contains({sentence.drug_id, sentence.index})) {
    throw InvariantError("sentence " + sentence.drug_id + "#" + std::to_string(sentence.index) +
                         " is already selected");
  }
  if (prompt.token_length_ + sentence.token_count > prompt.budget_) {
    return {prompt, false};
  }
  AppendResult r{prompt, true};
  (sentence.drug_id == prompt.u_id_ ? r.prompt.u_sel_ : r.prompt.v_sel_).push_back(sentence);
  r.prompt.token_length_ += sentence.token_count;
  audit(r.prompt);
  return r;
}

Prompt random_prompt(const Drug& u, const Drug& v, int budget, Rng& rng,
                     const PromptFormat& format) {
  std::vector<const Sentence*> pool;
  for (const auto& s : u.sentences) pool.push_back(&s);
  for (const auto& s : v.sentences) pool.push_back(&s);
  // Drawing without replacement == consuming a uniform shuffle in order.
  shuffle_in_place(pool, rng);
  Prompt p = Prompt::start(u, v, budget, format);
  for (const Sentence* s : pool) {
    auto r = try_append(p, *s);
    if (!r.accepted) break;
    p = std::move(r.prompt);
  }
  return p;
}

Prompt truncated_prompt(const Drug& u, const Drug& v, int budget, const PromptFormat& format) {
  Prompt p = Prompt::start(u, v, budget, format);
  std::size_t iu = 0, iv = 0;
  bool take_u = true;
  while (iu < u.sentences.size() || iv < v.sentences.size()) {
    const Sentence* s = nullptr;
    if ((take_u && iu < u.sentences.size()) || iv >= v.sentences.size()) {
      s = &u.sentences[iu++];
    } else {
      s = &v.sentences[iv++];
    }
    take_u = !take_u;
    auto r = try_append(p, *s);
    if (!r.accepted) break;
    p = std::move(r.prompt);
  }
  return p;
}

int full_prompt_length(const Drug& u, const Drug& v, const PromptFormat& format) {
  Prompt p = Prompt::start(u, v, 1 << 30, format);
  int n = p.token_length();
  for (const auto& s : u.sentences) n += s.token_count;
  for (const auto& s : v.sentences) n += s.token_count;
  return n;
}

BudgetAudit budget_audit() { return {g_checked.load(), g_violations.load()}; }

void reset_budget_audit() {
  g_checked = 0;
  g_violations = 0;
}

}  // namespace textddi
