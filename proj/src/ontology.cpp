#include "dialnoise/ontology.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

constexpr std::array<std::string_view, 20> kOnes = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen"};
constexpr std::array<std::string_view, 10> kTens = {
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};

constexpr std::array<std::string_view, 12> kMonths = {
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december"};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string two_digits(int n) {
  std::string s = std::to_string(n);
  return s.size() < 2 ? "0" + s : s;
}

bool valid_hhmm(std::string_view s) {
  if (s.size() != 5 || s[2] != ':' || !all_digits(s.substr(0, 2)) || !all_digits(s.substr(3, 2)))
    return false;
  int h = (s[0] - '0') * 10 + (s[1] - '0');
  int m = (s[3] - '0') * 10 + (s[4] - '0');
  return h <= 23 && m <= 59;
}

bool leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap_year(y) ? 29 : kDays[m - 1];
}

std::optional<std::string> make_iso_date(int y, int m, int d) {
  if (y < 1 || y > 9999 || m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) return std::nullopt;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return std::string(buf);
}

bool valid_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2)))
    return false;
  int y = std::stoi(std::string(s.substr(0, 4)));
  int m = std::stoi(std::string(s.substr(5, 2)));
  int d = std::stoi(std::string(s.substr(8, 2)));
  return make_iso_date(y, m, d).has_value();
}

std::optional<std::string> rewrite_time(const std::string& folded) {
  if (folded == "noon" || folded == "midday") return "12:00";
  if (folded == "midnight") return "00:00";
  static const std::regex h24(R"((\d{1,2})[:.](\d{2}))");
  static const std::regex h12(R"((\d{1,2})(?:[:.]?(\d{2}))?\s*(am|pm|a\.m\.|p\.m\.))");
  std::smatch m;
  if (std::regex_match(folded, m, h24)) {
    int h = std::stoi(m[1]);
    int mi = std::stoi(m[2]);
    if (h > 23 || mi > 59) return std::nullopt;
    return two_digits(h) + ":" + two_digits(mi);
  }
  if (std::regex_match(folded, m, h12)) {
    int h = std::stoi(m[1]);
    int mi = m[2].matched ? std::stoi(m[2]) : 0;
    if (h < 1 || h > 12 || mi > 59) return std::nullopt;
    const bool pm = m[3].str()[0] == 'p';
    if (h == 12) h = 0;
    if (pm) h += 12;
    return two_digits(h) + ":" + two_digits(mi);
  }
  return std::nullopt;
}

std::optional<int> month_index(std::string_view word) {
  for (std::size_t i = 0; i < kMonths.size(); ++i) {
    if (word == kMonths[i] || (word.size() == 3 && kMonths[i].substr(0, 3) == word))
      return static_cast<int>(i) + 1;
  }
  if (word == "sept") return 9;
  return std::nullopt;
}

std::optional<std::string> rewrite_date(const std::string& folded) {
  static const std::regex us(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
  static const std::regex month_first(R"(([a-z]+)\.?\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4}))");
  static const std::regex day_first(R"((\d{1,2})(?:st|nd|rd|th)?\s+(?:of\s+)?([a-z]+)\.?,?\s+(\d{4}))");
  std::smatch m;
  if (std::regex_match(folded, m, us))
    return make_iso_date(std::stoi(m[3]), std::stoi(m[1]), std::stoi(m[2]));
  if (std::regex_match(folded, m, month_first)) {
    if (auto month = month_index(m[1].str()))
      return make_iso_date(std::stoi(m[3]), *month, std::stoi(m[2]));
  }
  if (std::regex_match(folded, m, day_first)) {
    if (auto month = month_index(m[2].str()))
      return make_iso_date(std::stoi(m[3]), *month, std::stoi(m[1]));
  }
  return std::nullopt;
}

std::optional<std::string> match_listed(const std::string& folded, const std::vector<std::string>& listed) {
  for (const auto& v : listed)
    if (casefold(v) == folded) return v;
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

FormatRule FormatRule::time() {
  return {Kind::time_hhmm, "24-hour HH:MM", {}, {}, nullptr};
}
FormatRule FormatRule::date() {
  return {Kind::date_iso, "ISO date YYYY-MM-DD", {}, {}, nullptr};
}
FormatRule FormatRule::number() {
  return {Kind::number_digits, "ASCII digits", {}, {}, nullptr};
}
FormatRule FormatRule::location(std::vector<std::string> canonical) {
  if (canonical.empty()) throw SchemaError("location_canonical rule needs canonical values");
  return {Kind::location_canonical, "canonical location name", std::move(canonical), {}, nullptr};
}
FormatRule FormatRule::enumeration(std::vector<std::string> allowed) {
  if (allowed.empty()) throw SchemaError("enumeration rule needs at least one value");
  return {Kind::enumeration, "one of an enumerated list", std::move(allowed), {}, nullptr};
}
FormatRule FormatRule::regex(std::string pattern) {
  std::shared_ptr<const std::regex> compiled;
  try {
    compiled = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw SchemaError("pattern '" + pattern + "' does not compile: " + e.what());
  }
  return {Kind::pattern, "matches /" + pattern + "/", {}, pattern, std::move(compiled)};
}

std::string_view to_string(FormatRule::Kind k) {
  switch (k) {
    case FormatRule::Kind::time_hhmm: return "time_hhmm";
    case FormatRule::Kind::date_iso: return "date_iso";
    case FormatRule::Kind::number_digits: return "number_digits";
    case FormatRule::Kind::location_canonical: return "location_canonical";
    case FormatRule::Kind::enumeration: return "enumeration";
    case FormatRule::Kind::pattern: return "pattern";
  }
  return "pattern";
}

FormatRule::Kind parse_rule_kind(std::string_view s) {
  for (auto k : {FormatRule::Kind::time_hhmm, FormatRule::Kind::date_iso,
                 FormatRule::Kind::number_digits, FormatRule::Kind::location_canonical,
                 FormatRule::Kind::enumeration, FormatRule::Kind::pattern})
    if (to_string(k) == s) return k;
  throw SchemaError("unknown rule kind '" + std::string(s) + "'");
}

std::string_view variant_kind(FormatRule::Kind k) {
  switch (k) {
    case FormatRule::Kind::time_hhmm: return "time";
    case FormatRule::Kind::date_iso: return "date";
    case FormatRule::Kind::number_digits: return "number";
    case FormatRule::Kind::location_canonical: return "location";
    default: return "";
  }
}

bool OntologySchema::covers(std::string_view domain, std::string_view slot) const {
  return rule_for(domain, slot) != nullptr;
}

const FormatRule* OntologySchema::rule_for(std::string_view domain, std::string_view slot) const {
  auto it = slots.find({std::string(domain), std::string(slot)});
  if (it != slots.end()) return &it->second;
  it = slots.find({"*", std::string(slot)});
  return it != slots.end() ? &it->second : nullptr;
}

OntologySchema schema_from_json(const Json& j) {
  OntologySchema schema;
  if (!j.is_object() || !j.contains("slots") || !j["slots"].is_object())
    throw SchemaError("schema: expected object with a \"slots\" object");
  for (const auto& [key, body] : j["slots"].items()) {
    auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
      throw SchemaError("schema: slot key '" + key + "' must look like domain.slot");
    const std::string where = "schema.slots." + key;
    if (!body.is_object() || !body.contains("kind"))
      throw SchemaError(where + ": missing \"kind\"");
    auto kind = parse_rule_kind(body["kind"].get<std::string>());
    std::vector<std::string> values;
    if (body.contains("values")) values = body["values"].get<std::vector<std::string>>();
    FormatRule rule;
    switch (kind) {
      case FormatRule::Kind::time_hhmm: rule = FormatRule::time(); break;
      case FormatRule::Kind::date_iso: rule = FormatRule::date(); break;
      case FormatRule::Kind::number_digits: rule = FormatRule::number(); break;
      case FormatRule::Kind::location_canonical: rule = FormatRule::location(values); break;
      case FormatRule::Kind::enumeration: rule = FormatRule::enumeration(values); break;
      case FormatRule::Kind::pattern:
        if (!body.contains("pattern")) throw SchemaError(where + ": pattern rule needs \"pattern\"");
        rule = FormatRule::regex(body["pattern"].get<std::string>());
        break;
    }
    if (body.contains("description")) rule.description = body["description"].get<std::string>();
    schema.slots[{key.substr(0, dot), key.substr(dot + 1)}] = std::move(rule);
  }
  if (j.contains("merge_map")) {
    for (const auto& [alias, canonical] : j["merge_map"].items())
      schema.merge_map[casefold(alias)] = canonical.get<std::string>();
    for (const auto& [alias, canonical] : schema.merge_map)
      if (schema.merge_map.count(casefold(canonical)) && casefold(canonical) != alias)
        throw SchemaError("merge_map chains: '" + alias + "' -> '" + canonical +
                          "' which is itself an alias");
  }
  return schema;
}

OntologySchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  try {
    return schema_from_json(Json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

Json to_json(const OntologySchema& schema) {
  Json slots = Json::object();
  for (const auto& [key, rule] : schema.slots) {
    Json r = Json::object();
    r["kind"] = to_string(rule.kind);
    r["description"] = rule.description;
    if (!rule.values.empty()) r["values"] = rule.values;
    if (rule.kind == FormatRule::Kind::pattern) r["pattern"] = rule.pattern;
    slots[key.first + "." + key.second] = std::move(r);
  }
  Json merge = Json::object();
  for (const auto& [a, c] : schema.merge_map) merge[a] = c;
  Json j = Json::object();
  j["slots"] = std::move(slots);
  j["merge_map"] = std::move(merge);
  return j;
}

// ---------------------------------------------------------------------------

std::optional<int> parse_number_word(std::string_view word) {
  std::string w = casefold(word);
  std::replace(w.begin(), w.end(), '-', ' ');
  if (w == "one hundred" || w == "a hundred" || w == "hundred") return 100;
  for (std::size_t i = 0; i < kOnes.size(); ++i)
    if (w == kOnes[i]) return static_cast<int>(i);
  for (std::size_t t = 2; t < kTens.size(); ++t) {
    if (w == kTens[t]) return static_cast<int>(t * 10);
    const std::string prefix = std::string(kTens[t]) + " ";
    if (w.rfind(prefix, 0) == 0) {
      std::string rest = w.substr(prefix.size());
      for (std::size_t i = 1; i < 10; ++i)
        if (rest == kOnes[i]) return static_cast<int>(t * 10 + i);
    }
  }
  return std::nullopt;
}

std::string number_to_word(int n) {
  if (n < 0 || n > 100) throw Error("number_to_word supports 0..100");
  if (n == 100) return "one hundred";
  if (n < 20) return std::string(kOnes[n]);
  std::string out(kTens[n / 10]);
  if (n % 10) out += "-" + std::string(kOnes[n % 10]);
  return out;
}

bool validate_value(std::string_view value, const FormatRule& rule) {
  if (value.empty()) return false;
  switch (rule.kind) {
    case FormatRule::Kind::time_hhmm: return valid_hhmm(value);
    case FormatRule::Kind::date_iso: return valid_iso_date(value);
    case FormatRule::Kind::number_digits: return all_digits(value);
    case FormatRule::Kind::location_canonical:
    case FormatRule::Kind::enumeration: {
      const std::string folded = casefold(value);
      return !folded.empty() && match_listed(folded, rule.values).has_value();
    }
    case FormatRule::Kind::pattern:
      return rule.compiled && std::regex_match(value.begin(), value.end(), *rule.compiled);
  }
  return false;
}

std::optional<std::string> normalize_value(std::string_view raw, const FormatRule& rule,
                                           const std::map<std::string, std::string>& merge_map) {
  std::string value = trim(raw);
  if (value.empty()) return std::nullopt;
  if (auto it = merge_map.find(casefold(value)); it != merge_map.end()) value = it->second;
  const std::string folded = casefold(value);

  std::optional<std::string> candidate;
  switch (rule.kind) {
    case FormatRule::Kind::time_hhmm:
      candidate = valid_hhmm(value) ? std::optional(value) : rewrite_time(folded);
      break;
    case FormatRule::Kind::date_iso:
      candidate = valid_iso_date(value) ? std::optional(value) : rewrite_date(folded);
      break;
    case FormatRule::Kind::number_digits:
      if (all_digits(value)) {
        candidate = value;
      } else if (auto n = parse_number_word(folded)) {
        candidate = std::to_string(*n);
      }
      break;
    case FormatRule::Kind::location_canonical:
    case FormatRule::Kind::enumeration:
      candidate = match_listed(folded, rule.values);
      break;
    case FormatRule::Kind::pattern:
      if (validate_value(value, rule)) candidate = value;
      break;
  }
  if (candidate && validate_value(*candidate, rule)) return candidate;
  return std::nullopt;
}

CleaningPolicy parse_cleaning_policy(std::string_view s) {
  if (s == "drop_example" || s == "drop-example") return CleaningPolicy::drop_example;
  if (s == "drop_value" || s == "drop-value") return CleaningPolicy::drop_value;
  if (s == "normalize_first" || s == "normalize-first") return CleaningPolicy::normalize_first;
  throw Error("unknown cleaning policy '" + std::string(s) +
              "' (expected drop_example, drop_value, normalize_first)");
}

CleaningOutcome clean_ontology(const Corpus& corpus, const OntologySchema& schema,
                               CleaningPolicy policy) {
  std::set<std::string> uncovered;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns)
      for (const auto& sv : t.labels.belief_state)
        if (!schema.covers(sv.domain, sv.slot)) uncovered.insert(sv.domain + "." + sv.slot);
  if (!uncovered.empty()) {
    std::string list;
    for (const auto& u : uncovered) list += (list.empty() ? "" : ", ") + u;
    throw SchemaError("schema does not cover slot(s): " + list);
  }

  CleaningOutcome out;
  out.clean_corpus = corpus;
  out.clean_corpus.dialogues.clear();
  for (const auto& d : corpus.dialogues) {
    Dialogue kept = d;
    kept.turns.clear();
    for (const auto& t : d.turns) {
      const ExampleId id{d.dialogue_id, t.turn_id};
      Turn turn = t;
      std::vector<SlotValue> state;
      bool any_bad = false;
      for (const auto& sv : t.labels.belief_state) {
        const FormatRule& rule = *schema.rule_for(sv.domain, sv.slot);
        SlotValue current = sv;
        if (policy == CleaningPolicy::normalize_first) {
          if (auto norm = normalize_value(sv.value, rule, schema.merge_map); norm && *norm != sv.value) {
            out.normalized.push_back({id, sv, *norm});
            current.value = *norm;
          }
        }
        if (validate_value(current.value, rule)) {
          state.push_back(std::move(current));
        } else {
          any_bad = true;
          out.dropped_values.push_back({id, sv, rule.description});
        }
      }
      if (any_bad && policy == CleaningPolicy::drop_example) {
        out.removed_examples.push_back(id);
        continue;
      }
      turn.labels.belief_state = std::move(state);
      kept.turns.push_back(std::move(turn));
    }
    if (!kept.turns.empty()) out.clean_corpus.dialogues.push_back(std::move(kept));
  }
  return out;
}

Json to_json(const CleaningOutcome& outcome) {
  Json j = Json::object();
  Json dropped = Json::array();
  for (const auto& d : outcome.dropped_values) {
    Json row = Json::object();
    row["example_id"] = d.example_id.str();
    row["value"] = to_json(d.value);
    row["rule"] = d.rule;
    dropped.push_back(std::move(row));
  }
  j["dropped_values"] = std::move(dropped);
  Json removed = Json::array();
  for (const auto& id : outcome.removed_examples) removed.push_back(id.str());
  j["removed_examples"] = std::move(removed);
  Json normalized = Json::array();
  for (const auto& n : outcome.normalized) {
    Json row = Json::object();
    row["example_id"] = n.example_id.str();
    row["before"] = to_json(n.before);
    row["after"] = n.after;
    normalized.push_back(std::move(row));
  }
  j["normalized"] = std::move(normalized);
  return j;
}

}  // namespace dialnoise
