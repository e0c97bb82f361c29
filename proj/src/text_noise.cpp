#include "dialnoise/text_noise.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <sstream>

#include "dialnoise/corpus.hpp"

namespace dialnoise::text {

namespace {

bool ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char lower(char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; }
char with_case_of(char c, char model) {
  return model >= 'A' && model <= 'Z' && c >= 'a' && c <= 'z' ? static_cast<char>(c - 'a' + 'A') : c;
}

std::string neighbor_of(char c, const std::map<char, std::string>& neighbors, Rng& rng) {
  auto it = neighbors.find(lower(c));
  if (it == neighbors.end() || it->second.empty()) {
    char r;
    do {
      r = static_cast<char>('a' + rng.below(26));
    } while (r == lower(c));
    return std::string(1, with_case_of(r, c));
  }
  return std::string(1, with_case_of(it->second[rng.below(it->second.size())], c));
}

std::vector<std::size_t> letter_positions(std::string_view s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (ascii_letter(s[i])) out.push_back(i);
  return out;
}

// One edit at a random ASCII letter. Returns false when nothing changed.
bool one_edit(std::string& s, const std::map<char, std::string>& neighbors, Rng& rng) {
  auto pos = letter_positions(s);
  if (pos.empty()) return false;
  const std::size_t i = pos[rng.below(pos.size())];
  switch (rng.below(4)) {
    case 0:  // swap with the next letter
      if (i + 1 < s.size() && ascii_letter(s[i + 1]) && s[i] != s[i + 1]) {
        std::swap(s[i], s[i + 1]);
        return true;
      }
      [[fallthrough]];
    case 1:  // insert an adjacent key after i
      s.insert(i + 1, neighbor_of(s[i], neighbors, rng));
      return true;
    case 2:  // delete
      if (pos.size() > 1) {
        s.erase(i, 1);
        return true;
      }
      [[fallthrough]];
    default:  // substitute with an adjacent key
      s[i] = neighbor_of(s[i], neighbors, rng)[0];
      return true;
  }
}

std::string ordinal(int n) {
  const int mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    if (n % 10 == 1) suffix = "st";
    if (n % 10 == 2) suffix = "nd";
    if (n % 10 == 3) suffix = "rd";
  }
  return std::to_string(n) + suffix;
}

constexpr std::array<std::string_view, 12> kMonthNames = {
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December"};

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string shuffle_tokens(std::string_view text, Rng& rng) {
  auto tokens = split_tokens(text);
  const auto original = tokens;
  rng.shuffle(tokens);
  if (tokens == original && tokens.size() > 1) rng.shuffle(tokens);
  return join_tokens(tokens);
}

std::size_t osa_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[n][m];
}

std::optional<std::string> keyboard_typo(std::string_view text,
                                         const std::map<char, std::string>& neighbors, Rng& rng) {
  if (letter_positions(text).size() < 2) return std::nullopt;
  // Two random edits can interact (e.g. an insert undone by a delete); such
  // draws are rejected so the result is always 1 or 2 edits away.
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::string s(text);
    const std::size_t edits = 1 + rng.below(2);
    for (std::size_t e = 0; e < edits; ++e) one_edit(s, neighbors, rng);
    const std::size_t dist = osa_distance(text, s);
    if (dist >= 1 && dist <= 2) return s;
  }
  return substitute_letter(text, neighbors, rng);
}

std::optional<std::string> substitute_letter(std::string_view text,
                                             const std::map<char, std::string>& neighbors, Rng& rng) {
  auto pos = letter_positions(text);
  if (pos.empty()) return std::nullopt;
  std::string s(text);
  const std::size_t i = pos[rng.below(pos.size())];
  s[i] = neighbor_of(s[i], neighbors, rng)[0];
  return s;
}

std::string insert_disfluency(std::string_view text, Rng& rng, Disfluency* chosen) {
  auto tokens = split_tokens(text);
  auto kind = static_cast<Disfluency>(rng.below(4));
  if (tokens.size() < 2 && kind == Disfluency::correction) kind = Disfluency::umm;
  if (tokens.empty()) kind = Disfluency::umm;
  if (chosen) *chosen = kind;

  auto decapitalize = [](std::string s) {
    if (s.size() > 1 && s[0] >= 'A' && s[0] <= 'Z' && s[1] >= 'a' && s[1] <= 'z')
      s[0] = static_cast<char>(s[0] - 'A' + 'a');
    return s;
  };
  switch (kind) {
    case Disfluency::umm: return "umm, " + decapitalize(std::string(text));
    case Disfluency::uh: return "uh, " + decapitalize(std::string(text));
    case Disfluency::repetition: {
      const std::size_t i = rng.below(tokens.size());
      tokens.insert(tokens.begin() + static_cast<long>(i), tokens[i]);
      return join_tokens(tokens);
    }
    case Disfluency::correction: {
      const std::size_t k = 1 + rng.below(tokens.size() - 1);
      std::vector<std::string> head(tokens.begin(), tokens.begin() + static_cast<long>(k));
      std::string start = join_tokens(head);
      while (!start.empty() && (start.back() == ',' || start.back() == '.')) start.pop_back();
      return start + ", I mean, " + decapitalize(std::string(text));
    }
  }
  return std::string(text);
}

std::vector<AsrMatch> asr_matches(std::string_view text, const std::vector<AsrConfusion>& table) {
  const std::string folded = [&] {
    std::string s(text);
    for (char& c : s) c = lower(c);
    return s;
  }();
  auto boundary = [&](std::size_t i) { return i >= folded.size() || !ascii_letter(folded[i]); };
  std::vector<AsrMatch> out;
  for (const auto& entry : table) {
    std::string phrase = entry.phrase;
    for (char& c : phrase) c = lower(c);
    if (phrase.empty()) continue;
    for (std::size_t pos = folded.find(phrase); pos != std::string::npos;
         pos = folded.find(phrase, pos + 1)) {
      if ((pos == 0 || boundary(pos - 1)) && boundary(pos + phrase.size()))
        for (const auto& r : entry.replacements) out.push_back({pos, phrase.size(), r});
    }
  }
  std::sort(out.begin(), out.end(), [](const AsrMatch& a, const AsrMatch& b) {
    return std::tie(a.start, a.length, a.replacement) < std::tie(b.start, b.length, b.replacement);
  });
  return out;
}

std::string apply_asr(std::string_view text, const AsrMatch& match) {
  std::string s(text);
  s.replace(match.start, match.length, match.replacement);
  return s;
}

std::vector<std::string> time_variants(std::string_view hhmm, const std::vector<std::string>& generators) {
  if (hhmm.size() != 5 || hhmm[2] != ':') return {};
  for (std::size_t i : {0u, 1u, 3u, 4u})
    if (hhmm[i] < '0' || hhmm[i] > '9') return {};
  const int h = (hhmm[0] - '0') * 10 + (hhmm[1] - '0');
  const int m = (hhmm[3] - '0') * 10 + (hhmm[4] - '0');
  if (h > 23 || m > 59) return {};
  const int h12 = h % 12 == 0 ? 12 : h % 12;
  const char* suffix = h < 12 ? "AM" : "PM";
  const std::string mm = (m < 10 ? "0" : "") + std::to_string(m);
  std::vector<std::string> out;
  for (const auto& g : generators) {
    if (g == "clock12") {
      out.push_back(std::to_string(h12) + ":" + mm + " " + suffix);
    } else if (g == "compact") {
      out.push_back(std::to_string(h12) + (m ? mm : "") + (h < 12 ? "am" : "pm"));
    } else if (g == "spoken") {
      const int next = h12 % 12 + 1;
      if (m == 0) out.push_back(std::to_string(h12) + " o'clock");
      else if (m == 15) out.push_back("quarter past " + std::to_string(h12));
      else if (m == 30) out.push_back("half past " + std::to_string(h12));
      else if (m == 45) out.push_back("quarter to " + std::to_string(next));
      else if (m < 30) out.push_back(std::to_string(m) + " past " + std::to_string(h12));
      else out.push_back(std::to_string(60 - m) + " to " + std::to_string(next));
    }
  }
  return out;
}

std::vector<std::string> date_variants(std::string_view iso, const std::vector<std::string>& generators) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return {};
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (iso[i] < '0' || iso[i] > '9') return {};
  const int y = std::stoi(std::string(iso.substr(0, 4)));
  const int mo = std::stoi(std::string(iso.substr(5, 2)));
  const int d = std::stoi(std::string(iso.substr(8, 2)));
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return {};
  const std::string month(kMonthNames[static_cast<std::size_t>(mo - 1)]);
  std::vector<std::string> out;
  for (const auto& g : generators) {
    if (g == "month_abbrev_ordinal") out.push_back(month.substr(0, 3) + " " + ordinal(d));
    else if (g == "us_slash") out.push_back(std::to_string(mo) + "/" + std::to_string(d) + "/" + std::to_string(y));
    else if (g == "month_day") out.push_back(month + " " + std::to_string(d));
  }
  return out;
}

std::vector<std::string> value_variants(std::string_view value, std::string_view kind,
                                        const VariantTable& table) {
  std::vector<std::string> out;
  const std::string folded = casefold(value);
  for (const auto& group : table.groups) {
    const bool member = std::any_of(group.begin(), group.end(),
                                    [&](const std::string& g) { return casefold(g) == folded; });
    if (!member) continue;
    for (const auto& g : group)
      if (casefold(g) != folded) out.push_back(g);
  }
  if (kind == "time") {
    for (auto& v : time_variants(value, table.generators)) out.push_back(std::move(v));
  } else if (kind == "date") {
    for (auto& v : date_variants(value, table.generators)) out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t next_code_point(std::string_view s, std::size_t i) {
  if (i >= s.size()) return s.size();
  ++i;
  while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
  return i;
}

}  // namespace dialnoise::text
