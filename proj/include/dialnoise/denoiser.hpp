#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dialnoise/corpus.hpp"
#include "dialnoise/injector.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/predictions.hpp"

namespace dialnoise {

enum class DenoiseStep { ontology_clean, filter_disagree, coteach_pseudo };
enum class MatchMode { exact_state, per_slot };

std::string_view to_string(DenoiseStep s);
/// "ontology", "filter", "coteach" or the full step names.
DenoiseStep parse_denoise_step(std::string_view s);
MatchMode parse_match_mode(std::string_view s);

struct DenoiseConfig {
  std::set<DenoiseStep> steps;
  double threshold = 0.5;
  double temperature = 1.0;
  std::shared_ptr<const OntologySchema> schema;  // falls back to corpus.ontology
  MatchMode match_mode = MatchMode::exact_state;
  CleaningPolicy cleaning = CleaningPolicy::drop_example;
  // Classification target; when unset, class_labels if the corpus has any.
  std::optional<LabelTarget> target;
};

/// "Original", "Ontology Clean", "Filter Disagree", "Co-teaching",
/// "Combined"; other step sets join their names with " + ".
std::string ablation_name(const std::set<DenoiseStep>& steps);

/// Example ids the denoiser judges: user turns for dst, turns with
/// non-empty target labels for classification. Sorted.
std::vector<ExampleId> denoise_examples(const Corpus& corpus, PredictionKind kind, LabelTarget target);

struct FilterResult {
  Corpus kept;
  std::vector<ExampleId> stripped;  // sorted
};

FilterResult filter_disagreement(const Corpus& corpus, const std::vector<PredictionRecord>& predictions,
                                 MatchMode mode, const OntologySchema* schema = nullptr,
                                 std::optional<LabelTarget> target = std::nullopt);

struct PseudoLabel {
  ExampleId example_id;
  double confidence = 0.0;
  bool accepted = false;  // confidence > threshold
  std::vector<std::string> labels;   // classification: {argmax}
  std::vector<SlotValue> state;      // dst: predicted state
};

/// One entry per stripped id, in id order. `filter_predictor_id`, when
/// given, must differ from the second predictor.
std::vector<PseudoLabel> pseudo_label(const std::vector<ExampleId>& stripped,
                                      const std::vector<PredictionRecord>& second, double temperature,
                                      double threshold,
                                      const std::optional<std::string>& filter_predictor_id = std::nullopt);

struct DenoiseCounts {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t ontology_removed = 0;
  std::size_t filter_removed = 0;
  std::size_t pseudo_readded = 0;
  std::size_t output = 0;

  bool operator==(const DenoiseCounts&) const = default;
};

struct ProvenanceEntry {
  ExampleId example_id;
  std::vector<std::string> events;  // e.g. "ontology_clean:normalized"
  std::string status;               // kept | ontology_removed | filter_removed | pseudo_readded

  bool operator==(const ProvenanceEntry&) const = default;
};

struct DenoiseResult {
  Corpus clean_corpus;
  DenoiseCounts counts;
  std::string ablation_name;
  std::vector<ProvenanceEntry> provenance;  // judged examples, id order
};

DenoiseResult run_pipeline(const Corpus& corpus, const DenoiseConfig& config,
                           const std::vector<PredictionRecord>& predictions_a,
                           const std::vector<PredictionRecord>& predictions_b);

Json to_json(const DenoiseResult& result);
std::string render_denoise(const DenoiseResult& result);

}  // namespace dialnoise
