#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace textddi {

// Reference tokenizer. Lowercases, splits on whitespace, and peels every
// leading and trailing ASCII punctuation character off into its own token.
// Context free: tokenize(a + " " + b) == tokenize(a) ++ tokenize(b).
std::vector<std::string> tokenize(std::string_view text);

std::size_t token_count(std::string_view text);

// 64-bit FNV-1a over the token bytes.
std::uint64_t fnv1a64(std::string_view bytes);

// fnv1a64 of each token of tokenize(text), in order.
std::vector<std::uint64_t> token_hashes(std::string_view text);

// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view text);

}  // namespace textddi
