#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialnoise/corpus.hpp"

namespace dialnoise {

/// A node of the noise taxonomy tree. Leaves are the injectable / auditable
/// categories; interior nodes group them (e.g. training/labeling/instance).
class NoiseCategory {
 public:
  enum class Id : std::uint8_t {
    Training,
    Labeling,
    Class, ClassUniform, ClassStructured,
    Instance, InstanceOver, InstanceUnder, InstancePartial,
    Annotator, AnnotatorDistantSupervision, AnnotatorAdversarial, AnnotatorFormatting,
    Ontology, OntologyDate, OntologyTime, OntologyLocation, OntologyNumber, OntologyGeneral,
    Discourse, DiscourseIncoherent, DiscourseDisfluent, DiscourseInconsistent,
    DiscourseNonsensical, DiscourseOffensive, DiscourseUnnatural,
    Inference,
    Ood, OodNovelQuery, OodUnseenEntity, OodDomainShift,
    Breakdown, BreakdownAmbiguous,
    Paraphrase, ParaphraseSimplification, ParaphraseNonSequitur, ParaphraseVerbosity,
    Perturbation, PerturbationAsr, PerturbationTypo, PerturbationDisfluency,
  };

  constexpr NoiseCategory(Id id) : id_(id) {}  // NOLINT(google-explicit-constructor)

  Id id() const { return id_; }
  bool is_leaf() const;
  /// Slash path, lower case: "training/labeling/class/structured".
  std::string render() const;
  std::vector<std::string_view> segments() const;
  /// Row label used in prevalence tables ("Class-level", "Dates", ...).
  std::string_view display_name() const;
  std::optional<NoiseCategory> parent() const;
  std::vector<NoiseCategory> children() const;
  std::size_t depth() const;
  /// True when `other` is this node or lies beneath it.
  bool contains(NoiseCategory other) const;

  static const std::vector<NoiseCategory>& all();     // pre-order
  static const std::vector<NoiseCategory>& leaves();  // pre-order

  auto operator<=>(const NoiseCategory&) const = default;

 private:
  Id id_;
};

/// Parses a slash path case-insensitively; '_' '-' and spaces inside a
/// segment are ignored, so "Training/LabelingError/Class/Structured" works.
/// Accepts interior nodes.
NoiseCategory parse_category_node(std::string_view s);

/// Like parse_category_node but only accepts leaves.
NoiseCategory parse_category(std::string_view s);

struct AuditTally {
  std::string dataset;
  std::uint64_t dialogues_reviewed = 0;
  std::map<NoiseCategory, std::uint64_t> counts;
  std::uint64_t dialogues_with_any_noise = 0;
};

struct PrevalenceStats {
  double average = 0.0;  // percent
  double median = 0.0;
  double stddev = 0.0;   // population

  bool operator==(const PrevalenceStats&) const = default;
};

struct DatasetRate {
  std::string dataset;
  double rate = 0.0;  // percent
  std::string flag;   // "", "below_5pct", "above_20pct"

  bool operator==(const DatasetRate&) const = default;
};

struct PrevalenceReport {
  // Every taxonomy node, pre-order.
  std::vector<std::pair<NoiseCategory, PrevalenceStats>> categories;
  PrevalenceStats overall;
  std::vector<DatasetRate> datasets;

  const PrevalenceStats& at(NoiseCategory c) const;
  PrevalenceStats& at(NoiseCategory c);
  bool operator==(const PrevalenceReport&) const = default;
};

/// A report with every statistic zero and no datasets.
PrevalenceReport empty_prevalence_report();

PrevalenceReport aggregate_prevalence(const std::vector<AuditTally>& tallies);

// compact: one "<path> <average>/<median>/<stddev>" line per node, then
// "overall ...".
enum class ReportFormat { text_table, json, compact };

std::string render_report(const PrevalenceReport& report, ReportFormat format);
PrevalenceReport report_from_json(const Json& j);

/// "4.9%", "<0.1%", "0.0%".
std::string format_percent(double percent);
/// "4.9/3.8/0.7" (one decimal, no percent signs).
std::string format_triplet(const PrevalenceStats& s);

std::vector<AuditTally> load_tallies(const std::filesystem::path& path);
std::vector<AuditTally> tallies_from_json(const Json& j);
Json to_json(const AuditTally& tally);

/// Population mean / median / stddev over `values`. Empty input gives zeros.
PrevalenceStats summarize(std::vector<double> values);

}  // namespace dialnoise
