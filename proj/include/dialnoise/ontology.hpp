#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialnoise/corpus.hpp"

namespace dialnoise {

struct FormatRule {
  enum class Kind { time_hhmm, date_iso, number_digits, location_canonical, enumeration, pattern };

  Kind kind = Kind::pattern;
  std::string description;
  // enumeration: allowed values. location_canonical: canonical place names.
  std::vector<std::string> values;
  std::string pattern;
  std::shared_ptr<const std::regex> compiled;  // set for Kind::pattern

  static FormatRule time();
  static FormatRule date();
  static FormatRule number();
  static FormatRule location(std::vector<std::string> canonical);
  static FormatRule enumeration(std::vector<std::string> allowed);
  static FormatRule regex(std::string pattern);
};

std::string_view to_string(FormatRule::Kind k);
FormatRule::Kind parse_rule_kind(std::string_view s);

/// Slot kind used by the ontology-variant injector: "time", "date", "number",
/// "location", or "" when the rule has no variant family.
std::string_view variant_kind(FormatRule::Kind k);

struct OntologySchema {
  // (domain, slot) -> rule. Domain "*" matches any domain.
  std::map<std::pair<std::string, std::string>, FormatRule> slots;
  // casefolded alias -> canonical value
  std::map<std::string, std::string> merge_map;

  bool covers(std::string_view domain, std::string_view slot) const;
  const FormatRule* rule_for(std::string_view domain, std::string_view slot) const;
};

OntologySchema schema_from_json(const Json& j);
OntologySchema load_schema(const std::filesystem::path& path);
Json to_json(const OntologySchema& schema);

bool validate_value(std::string_view value, const FormatRule& rule);

/// Canonical form of `value` under `rule`, or nullopt when no deterministic
/// rewrite applies. Every returned value satisfies validate_value, and
/// normalize_value is idempotent on its outputs.
std::optional<std::string> normalize_value(std::string_view value, const FormatRule& rule,
                                           const std::map<std::string, std::string>& merge_map);

/// Number word -> integer for 0..100 ("three", "twenty-one", "twenty one").
std::optional<int> parse_number_word(std::string_view word);
std::string number_to_word(int n);

enum class CleaningPolicy { drop_example, drop_value, normalize_first };
CleaningPolicy parse_cleaning_policy(std::string_view s);

struct DroppedValue {
  ExampleId example_id;
  SlotValue value;
  std::string rule;
};

struct NormalizedValue {
  ExampleId example_id;
  SlotValue before;
  std::string after;
};

struct CleaningOutcome {
  Corpus clean_corpus;
  std::vector<DroppedValue> dropped_values;
  std::vector<ExampleId> removed_examples;
  std::vector<NormalizedValue> normalized;
};

/// Ontology cleaning over belief-state values. Throws SchemaError listing
/// every (domain, slot) pair the schema does not cover.
CleaningOutcome clean_ontology(const Corpus& corpus, const OntologySchema& schema,
                               CleaningPolicy policy);

Json to_json(const CleaningOutcome& outcome);

}  // namespace dialnoise
