#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dialnoise {

using Json = nlohmann::ordered_json;

struct OntologySchema;

struct SlotValue {
  std::string domain;
  std::string slot;
  std::string value;

  auto operator<=>(const SlotValue&) const = default;
};

struct Span {
  std::string label;
  std::int64_t start = 0;
  std::int64_t end = 0;

  auto operator<=>(const Span&) const = default;
};

struct AnnotationSet {
  std::vector<std::string> class_labels;
  std::vector<std::string> dialog_acts;
  std::vector<SlotValue> belief_state;
  std::vector<Span> spans;
  std::optional<std::string> reference_response;

  bool operator==(const AnnotationSet&) const = default;
};

enum class Speaker { user, system };

struct Turn {
  std::int64_t turn_id = 0;
  Speaker speaker = Speaker::user;
  std::string text;
  AnnotationSet labels;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<std::string> domains;  // kept sorted and unique
  std::vector<Turn> turns;

  bool operator==(const Dialogue&) const = default;
};

enum class TaskKind { CLC, TLC, DST, RG, IR };

struct Corpus {
  std::string name;
  std::vector<TaskKind> task_kinds;  // canonical enum order, unique
  std::vector<Dialogue> dialogues;
  std::shared_ptr<const OntologySchema> ontology;

  bool operator==(const Corpus& other) const {
    return name == other.name && task_kinds == other.task_kinds &&
           dialogues == other.dialogues;
  }
};

/// (dialogue_id, turn_id). Renders as "<dialogue_id>:<turn_id>".
struct ExampleId {
  std::string dialogue_id;
  std::int64_t turn_id = 0;

  auto operator<=>(const ExampleId&) const = default;

  std::string str() const;
  static ExampleId parse(std::string_view s);
};

struct Selection {
  std::vector<ExampleId> example_ids;  // sorted
  std::uint64_t seed = 0;
  double rate = 0.0;
};

struct Violation {
  std::string dialogue_id;
  std::optional<std::int64_t> turn_id;
  std::string rule;
  std::string detail;
};

enum class SampleUnit { turn, dialogue };

struct StatsReport {
  std::size_t dialogue_count = 0;
  std::size_t turn_count = 0;
  std::size_t user_turns = 0;
  std::size_t system_turns = 0;
  std::size_t action_only_turns = 0;
  // label type -> number of labels of that type across turns
  std::map<std::string, std::size_t> label_counts;
  // domain -> number of dialogues mentioning it
  std::map<std::string, std::size_t> domain_counts;
};

std::string_view to_string(Speaker s);
std::string_view to_string(TaskKind k);
Speaker parse_speaker(std::string_view s);
TaskKind parse_task_kind(std::string_view s);

Json to_json(const SlotValue& sv);
Json to_json(const Turn& turn);
Json to_json(const Corpus& corpus);
Corpus corpus_from_json(const Json& j);
Turn turn_from_json(const Json& j, const std::string& path = "turn");

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
/// Canonical serialization; the bytes written by save_corpus.
std::string dump_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text);

std::vector<Violation> validate_corpus(const Corpus& corpus);

/// Number of units to select: ceil(rate * n), with products that are
/// integral up to floating-point noise (e.g. 0.07 * 100) kept exact.
std::size_t quota(double rate, std::size_t n);

/// Orders units by a seed-keyed hash. The first k entries form a uniform
/// k-subset. Pure function of the id set and seed.
std::vector<ExampleId> rank_units(std::vector<ExampleId> ids, std::uint64_t seed);

/// Uniform selection of quota(rate, |ids|) ids without replacement, returned
/// sorted.
Selection select_units(std::vector<ExampleId> ids, double rate, std::uint64_t seed);

Selection sample_examples(const Corpus& corpus, double rate, std::uint64_t seed,
                          SampleUnit unit);

StatsReport corpus_stats(const Corpus& corpus);
Json to_json(const StatsReport& report);
std::string render_stats(const StatsReport& report);

std::vector<ExampleId> all_turn_ids(const Corpus& corpus);

/// Index into dialogues/turns by id. Returns nullptr when absent.
const Turn* find_turn(const Corpus& corpus, const ExampleId& id);
Turn* find_turn(Corpus& corpus, const ExampleId& id);

/// Trim ASCII whitespace and lower-case ASCII letters.
std::string casefold(std::string_view s);
std::string trim(std::string_view s);

/// MultiWOZ 2.x data.json importer: user turns take the belief state of the
/// following system turn's metadata ("semi" + "book" slots, skipping empty
/// and "not mentioned" values).
Corpus import_multiwoz(const Json& data, std::string name = "MWOZ");

}  // namespace dialnoise
