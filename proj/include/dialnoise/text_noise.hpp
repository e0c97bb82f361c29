#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialnoise/data_tables.hpp"
#include "dialnoise/random.hpp"

namespace dialnoise::text {

std::vector<std::string> split_tokens(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

/// Uniform permutation of whitespace tokens, redrawn once when it comes out
/// as the identity and there is more than one token.
std::string shuffle_tokens(std::string_view text, Rng& rng);

/// Restricted Damerau-Levenshtein (optimal string alignment) distance.
std::size_t osa_distance(std::string_view a, std::string_view b);

/// One or two character edits (adjacent swap, adjacent-key insert, delete,
/// adjacent-key substitute) on ASCII letters. nullopt when the text has
/// fewer than two ASCII letters.
std::optional<std::string> keyboard_typo(std::string_view text,
                                         const std::map<char, std::string>& neighbors, Rng& rng);

/// Single adjacent-key substitution on an ASCII letter.
std::optional<std::string> substitute_letter(std::string_view text,
                                             const std::map<char, std::string>& neighbors, Rng& rng);

enum class Disfluency { umm, uh, repetition, correction };

/// Inserts a filler, repeats a word, or restarts with an "I mean," correction.
std::string insert_disfluency(std::string_view text, Rng& rng, Disfluency* chosen = nullptr);

struct AsrMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  std::string replacement;
};

/// Every (position, replacement) pair where a confusion phrase occurs on
/// word boundaries, case-insensitively.
std::vector<AsrMatch> asr_matches(std::string_view text, const std::vector<AsrConfusion>& table);
std::string apply_asr(std::string_view text, const AsrMatch& match);

/// "14:15" -> {"2:15 PM", "quarter past 2", "215pm"}. Empty for non-HH:MM.
std::vector<std::string> time_variants(std::string_view hhmm, const std::vector<std::string>& generators);
/// "2022-01-03" -> {"Jan 3rd", "1/3/2022", "January 3"}. Empty for non-ISO.
std::vector<std::string> date_variants(std::string_view iso, const std::vector<std::string>& generators);

/// Alternate surface forms of `value` under `table` (groups matched after
/// casefolding, plus generator output), excluding the value itself.
std::vector<std::string> value_variants(std::string_view value, std::string_view kind,
                                        const VariantTable& table);

/// Byte index of the code point following the one that starts at `i`.
std::size_t next_code_point(std::string_view s, std::size_t i);

}  // namespace dialnoise::text
