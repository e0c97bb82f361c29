#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "dialnoise/data_tables.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/text_noise.hpp"

using namespace dialnoise;

namespace {

// Plain Levenshtein plus adjacent transposition, computed recursively with
// memoization; independent of the library's table implementation.
std::size_t reference_distance(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = std::min({go(i - 1, j) + 1, go(i, j - 1) + 1, go(i - 1, j - 1) + (a[i - 1] != b[j - 1])});
    if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) best = std::min(best, go(i - 2, j - 2) + 1);
    return memo[key] = best;
  };
  return go(a.size(), b.size());
}

std::multiset<std::string> token_bag(const std::string& s) {
  const auto t = text::split_tokens(s);
  return {t.begin(), t.end()};
}

const DataTables& tables() {
  static const DataTables t = load_data_tables();
  return t;
}

}  // namespace

TEST(OsaDistance, AgreesWithReference) {
  const std::vector<std::string> words = {"", "a", "ab", "ba", "book", "boko", "bokk", "table", "tabel", "cat", "act"};
  for (const auto& a : words)
    for (const auto& b : words) EXPECT_EQ(text::osa_distance(a, b), reference_distance(a, b)) << a << "/" << b;
}

TEST(KeyboardTypo, OneOrTwoEditsAway) {
  const std::vector<std::string> inputs = {"book a table for two", "I need a taxi", "hi", "Cambridge", "ok 12"};
  for (const auto& s : inputs) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(seed);
      const auto out = text::keyboard_typo(s, tables().keyboard_neighbors, rng);
      ASSERT_TRUE(out.has_value());
      const std::size_t d = reference_distance(s, *out);
      ASSERT_TRUE(d == 1 || d == 2) << s << " -> " << *out;
    }
  }
  Rng rng(1);
  EXPECT_FALSE(text::keyboard_typo("a 1", tables().keyboard_neighbors, rng).has_value());
}

TEST(KeyboardTypo, SubstitutionsUseAdjacentKeys) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto out = text::substitute_letter("gggg", tables().keyboard_neighbors, rng);
    ASSERT_TRUE(out);
    for (char c : *out)
      if (c != 'g') EXPECT_NE(tables().keyboard_neighbors.at('g').find(c), std::string::npos) << c;
  }
}

TEST(Shuffle, PreservesTokenMultiset) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const std::string in = "book a table for two at seven";
    EXPECT_EQ(token_bag(text::shuffle_tokens(in, rng)), token_bag(in));
  }
  Rng rng(4);
  EXPECT_EQ(token_bag(text::shuffle_tokens("book a table", rng)), token_bag("book a table"));
}

TEST(Shuffle, IdentityIsRedrawnOnce) {
  // With two distinct tokens an identity draw is redrawn, so the swap shows
  // up with probability 3/4 instead of 1/2.
  int swapped = 0;
  const int n = 20000;
  for (int seed = 0; seed < n; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    swapped += text::shuffle_tokens("hello world", rng) == "world hello";
  }
  EXPECT_NEAR(swapped / double(n), 0.75, 0.02);
}

TEST(Disfluency, InsertionsFromTheFixedSet) {
  std::set<text::Disfluency> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng rng(seed);
    text::Disfluency kind{};
    const std::string out = text::insert_disfluency("book a table", rng, &kind);
    seen.insert(kind);
    switch (kind) {
      case text::Disfluency::umm: EXPECT_EQ(out, "umm, book a table"); break;
      case text::Disfluency::uh: EXPECT_EQ(out, "uh, book a table"); break;
      case text::Disfluency::repetition: {
        auto bag = token_bag("book a table");
        auto got = token_bag(out);
        EXPECT_EQ(got.size(), 4u);
        for (const auto& t : bag) EXPECT_TRUE(got.count(t));
        break;
      }
      case text::Disfluency::correction:
        EXPECT_NE(out.find(", I mean, book a table"), std::string::npos) << out;
        break;
    }
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Asr, ShippedTableHasTheClassicConfusion) {
  const auto matches = text::asr_matches("It is hard to Recognize speech today", tables().asr_confusions);
  ASSERT_FALSE(matches.empty());
  bool found = false;
  for (const auto& m : matches)
    if (text::apply_asr("It is hard to Recognize speech today", m) == "It is hard to wreck a nice beach today")
      found = true;
  EXPECT_TRUE(found);
  // Word boundaries are respected.
  EXPECT_TRUE(text::asr_matches("unrecognize speeches", {{"recognize speech", {"x"}}}).empty());
}

TEST(Variants, ClockAndSpokenForms) {
  const auto v = text::time_variants("14:15", {"clock12", "spoken", "compact"});
  EXPECT_EQ(v, (std::vector<std::string>{"2:15 PM", "quarter past 2", "215pm"}));
  EXPECT_EQ(text::time_variants("00:00", {"clock12", "spoken", "compact"}),
            (std::vector<std::string>{"12:00 AM", "12 o'clock", "12am"}));
  EXPECT_EQ(text::time_variants("09:40", {"spoken"}), std::vector<std::string>{"20 to 10"});
  EXPECT_TRUE(text::time_variants("25:00", {"clock12"}).empty());
  EXPECT_TRUE(text::time_variants("friday", {"clock12"}).empty());
}

TEST(Variants, CalendarForms) {
  EXPECT_EQ(text::date_variants("2022-01-03", {"month_abbrev_ordinal", "us_slash", "month_day"}),
            (std::vector<std::string>{"Jan 3rd", "1/3/2022", "January 3"}));
  EXPECT_EQ(text::date_variants("2022-03-22", {"month_abbrev_ordinal"}), std::vector<std::string>{"Mar 22nd"});
  EXPECT_EQ(text::date_variants("2022-03-12", {"month_abbrev_ordinal"}), std::vector<std::string>{"Mar 12th"});
}

TEST(Variants, LocationGroup) {
  const auto v = text::value_variants("NYC", "location", tables().variants.at("location"));
  EXPECT_EQ(std::set<std::string>(v.begin(), v.end()), (std::set<std::string>{"New York", "ny", "the big apple"}));
}

TEST(Variants, TimeVariantsNormalizeBack) {
  const auto rule = FormatRule::time();
  for (const char* t : {"14:15", "09:00", "00:30", "12:45", "23:59", "07:05"}) {
    for (const auto& v : text::value_variants(t, "time", tables().variants.at("time"))) {
      const auto back = normalize_value(v, rule, {});
      // Spoken forms are ambiguous between AM and PM and may not come back.
      if (back) EXPECT_TRUE(*back == t || v.find("past") != std::string::npos ||
                            v.find(" to ") != std::string::npos || v.find("o'clock") != std::string::npos)
          << t << " -> " << v << " -> " << *back;
    }
  }
}

TEST(Variants, NumberTableRoundTrips) {
  const auto& table = tables().variants.at("number");
  for (const auto& group : table.groups) {
    ASSERT_EQ(group.size(), 2u);
    const auto& digits = group[0];
    const auto& word = group[1];
    EXPECT_EQ(text::value_variants(digits, "number", table), std::vector<std::string>{word});
    EXPECT_EQ(text::value_variants(word, "number", table), std::vector<std::string>{digits});
    EXPECT_EQ(number_to_word(std::stoi(digits)), word);
    EXPECT_EQ(parse_number_word(word), std::stoi(digits));
  }
}

TEST(CodePoints, StepsOverMultibyteSequences) {
  const std::string s = "caf\xc3\xa9!";
  EXPECT_EQ(text::next_code_point(s, 2), 3u);
  EXPECT_EQ(text::next_code_point(s, 3), 5u);
  EXPECT_EQ(text::next_code_point(s, 5), 6u);
  EXPECT_EQ(text::next_code_point(s, 6), 6u);
}
