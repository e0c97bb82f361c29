#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialnoise/corpus.hpp"
#include "dialnoise/data_tables.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/taxonomy.hpp"
#include "dialnoise/transition_matrix.hpp"

namespace dialnoise {

enum class InjectAction {
  swap, insert, replace, drop, rewrite, spam, truncate_span, shuffle, substitute_sentence, perturb
};

std::string_view to_string(InjectAction a);
InjectAction parse_inject_action(std::string_view s);

struct LogRecord {
  ExampleId example_id;
  NoiseCategory category = NoiseCategory::Id::Training;
  InjectAction action = InjectAction::replace;
  Json before;
  Json after;
  std::string detail;

  bool operator==(const LogRecord&) const = default;
};

/// A selected example the injector could not corrupt (ontology variants
/// with no matching rewrite rule).
struct SkipRecord {
  ExampleId example_id;
  std::string reason;

  bool operator==(const SkipRecord&) const = default;
};

struct InjectionResult {
  Corpus corpus;
  std::vector<LogRecord> log;        // sorted by example id
  std::vector<SkipRecord> skipped;   // sorted by example id
};

struct InjectOptions {
  double rate = 0.10;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

Json to_json(const LogRecord& r);
LogRecord log_record_from_json(const Json& j);
/// One JSON object per line, compact.
std::string dump_log(const std::vector<LogRecord>& log);
void save_log(const std::vector<LogRecord>& log, const std::filesystem::path& path);
std::vector<LogRecord> load_log(const std::filesystem::path& path);

// Class-level ---------------------------------------------------------------

enum class ClassNoiseMode { uniform, structured };
enum class LabelTarget { class_labels, dialog_acts };

LabelTarget parse_label_target(std::string_view s);

struct ClassNoiseParams {
  ClassNoiseMode mode = ClassNoiseMode::uniform;
  LabelTarget target = LabelTarget::class_labels;
  std::optional<TransitionMatrix> matrix;  // required for structured
};

/// Eligible: turns with a non-empty target label list. One label per
/// selected turn is swapped for a different label.
InjectionResult inject_class_noise(const Corpus& corpus, const ClassNoiseParams& params,
                                   const InjectOptions& opts);

/// Distinct labels of the target field, sorted.
std::vector<std::string> observed_labels(const Corpus& corpus, LabelTarget target);

// Instance-level ------------------------------------------------------------

enum class InstanceKind { over, partial, under };

struct InstanceNoiseParams {
  std::size_t window_size = 3;
  std::optional<InstanceKind> forced;
};

/// Distinct slot values from the belief states of the `window` closest
/// earlier turns (by turn_id) of the same dialogue that have a non-empty
/// state. Sorted.
std::vector<SlotValue> recent_label_pool(const Dialogue& dialogue, std::size_t turn_index,
                                         std::size_t window);

InjectionResult inject_instance_noise(const Corpus& corpus, const InstanceNoiseParams& params,
                                      const InjectOptions& opts);

// Annotator-level -----------------------------------------------------------

enum class AnnotatorKind { spam_class, spam_generation, formatting };
AnnotatorKind parse_annotator_kind(std::string_view s);

struct AnnotatorNoiseParams {
  AnnotatorKind kind = AnnotatorKind::spam_class;
  LabelTarget target = LabelTarget::class_labels;
  std::vector<std::string> generic_phrases;
  std::map<char, std::string> keyboard_neighbors;
};

/// The three most frequent labels (ties broken lexicographically).
std::vector<std::string> top_labels(const Corpus& corpus, LabelTarget target, std::size_t k = 3);

InjectionResult inject_annotator_noise(const Corpus& corpus, const AnnotatorNoiseParams& params,
                                       const InjectOptions& opts);

// Discourse -----------------------------------------------------------------

enum class DiscourseKind { incoherent, disfluent, unnatural };
DiscourseKind parse_discourse_kind(std::string_view s);

struct DiscourseNoiseParams {
  DiscourseKind kind = DiscourseKind::incoherent;
  std::vector<std::string> unnatural_phrases;
  std::optional<Speaker> speaker;  // restrict targets to one side
};

InjectionResult inject_discourse_noise(const Corpus& corpus, const DiscourseNoiseParams& params,
                                       const InjectOptions& opts);

// Ontology variants ---------------------------------------------------------

struct OntologyVariantParams {
  VariantTables tables;
  std::shared_ptr<const OntologySchema> schema;  // falls back to corpus.ontology
  // Subset of {"time","date","location","number"}; empty means every kind
  // the schema uses.
  std::set<std::string> kinds;
};

/// Selected turns are visited in rank order; turns whose values have no
/// alternate surface form are skipped and the scan continues until the
/// quota is met or candidates run out.
InjectionResult inject_ontology_variants(const Corpus& corpus, const OntologyVariantParams& params,
                                         const InjectOptions& opts);

// Breakdown -----------------------------------------------------------------

class Perturber {
 public:
  virtual ~Perturber() = default;
  /// Paraphrase of `text`. Must be safe to call from several threads.
  virtual std::string perturb(const ExampleId& id, const std::string& text) = 0;
};

enum class BreakdownKind { typo, disfluency, asr, paraphrase };
BreakdownKind parse_breakdown_kind(std::string_view s);

struct BreakdownNoiseParams {
  BreakdownKind kind = BreakdownKind::typo;
  std::vector<AsrConfusion> asr_confusions;
  std::map<char, std::string> keyboard_neighbors;
  Perturber* perturber = nullptr;
};

/// Targets user turns only.
InjectionResult inject_breakdown_noise(const Corpus& corpus, const BreakdownNoiseParams& params,
                                       const InjectOptions& opts);

// Out-of-distribution splits ------------------------------------------------

struct OodSplit {
  std::set<std::string> heldout;
  Corpus train;
  Corpus test;
};

std::set<std::string> observed_domains(const Corpus& corpus);

/// Train keeps the dialogues of `train_pool` whose domains avoid `heldout`;
/// test is `test_pool` untouched.
OodSplit make_ood_split(const Corpus& train_pool, const Corpus& test_pool,
                        const std::set<std::string>& heldout);
OodSplit make_ood_split(const Corpus& corpus, const std::set<std::string>& heldout);

/// One split per observed domain of `train_pool`, in domain order.
std::vector<OodSplit> leave_one_out_splits(const Corpus& train_pool, const Corpus& test_pool);

// Category dispatch ---------------------------------------------------------

struct NoiseSpec {
  NoiseCategory category = NoiseCategory::Id::ClassUniform;
  double rate = 0.10;
  std::uint64_t seed = 0;
  // Category-specific: "target", "window_size", "kind", "speaker",
  // "generic_phrases", "unnatural_phrases", "kinds".
  Json params = Json::object();
};

struct InjectionResources {
  DataTables tables;
  std::shared_ptr<const OntologySchema> schema;
  std::optional<TransitionMatrix> matrix;
  std::shared_ptr<const EmbeddingTable> embeddings;  // builds the matrix when absent
  Perturber* perturber = nullptr;
};

/// True for categories `inject` can apply.
bool is_injectable(NoiseCategory category);

InjectionResult inject(const Corpus& corpus, const NoiseSpec& spec,
                       const InjectionResources& resources, unsigned jobs = 1);

struct SweepPoint {
  double level = 0.0;
  InjectionResult result;
};

/// Seed for one sweep level, derived from the base seed and the level.
std::uint64_t sweep_seed(std::uint64_t base, double level);

std::vector<SweepPoint> sweep(const Corpus& corpus, const NoiseSpec& base,
                              const std::vector<double>& levels,
                              const InjectionResources& resources, unsigned jobs = 1);

}  // namespace dialnoise
