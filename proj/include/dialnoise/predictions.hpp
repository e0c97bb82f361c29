#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dialnoise/corpus.hpp"
#include "dialnoise/injector.hpp"

namespace dialnoise {

enum class PredictionKind { classification, dst };

std::string_view to_string(PredictionKind k);
PredictionKind parse_prediction_kind(std::string_view s);

/// One predictor output for one example. DST scores are logits against an
/// implicit "no value" option scored 0: per (domain, slot) the highest
/// scoring value is predicted when its score is above 0.
struct PredictionRecord {
  ExampleId example_id;
  std::string predictor_id;
  PredictionKind kind = PredictionKind::classification;
  std::vector<std::pair<std::string, double>> candidates;  // classification
  std::vector<std::pair<SlotValue, double>> state;         // dst

  bool operator==(const PredictionRecord&) const = default;
};

Json to_json(const PredictionRecord& r);
/// Validates field names and types; throws SchemaError naming the problem.
PredictionRecord prediction_from_json(const Json& j);
std::string dump_predictions(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> parse_predictions(std::string_view text, const std::string& source = "predictions");
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);

/// Predicted label (classification) at any temperature.
std::string predicted_label(const PredictionRecord& r);
/// Predicted belief state (dst), in (domain, slot) order.
std::vector<SlotValue> predicted_state(const PredictionRecord& r);

/// Max calibrated probability. For dst: the minimum over listed slots of
/// the winning option's probability (values plus the implicit empty
/// option); an empty state list gives 1.
double prediction_confidence(const PredictionRecord& r, double temperature);

struct ServiceOptions {
  std::string url;  // "http://host:port"
  std::chrono::milliseconds timeout{5000};
  unsigned retries = 2;
};

/// Client for a prediction service: POST /predict with
/// {"example_id", "context": turn} and a PredictionRecord in reply.
class PredictionClient {
 public:
  explicit PredictionClient(ServiceOptions options);

  PredictionRecord predict(const ExampleId& id, const Turn& turn) const;
  /// Queries every id in order; `jobs` requests in flight.
  std::vector<PredictionRecord> predict_all(const Corpus& corpus, const std::vector<ExampleId>& ids,
                                            unsigned jobs = 1) const;

 private:
  ServiceOptions options_;
};

/// POSTs `body` to `path`, retrying connection failures and 5xx replies.
/// Throws IoError once retries are exhausted.
Json post_json(const ServiceOptions& options, const std::string& path, const Json& body);

/// Paraphrases read from a JSONL file of {"example_id", "text"} lines.
class FilePerturber : public Perturber {
 public:
  explicit FilePerturber(const std::filesystem::path& path);
  std::string perturb(const ExampleId& id, const std::string& text) override;

 private:
  std::map<ExampleId, std::string> texts_;
};

/// Paraphrases from a service: POST /predict {"example_id", "text"} ->
/// {"text"}.
class HttpPerturber : public Perturber {
 public:
  explicit HttpPerturber(ServiceOptions options) : options_(std::move(options)) {}
  std::string perturb(const ExampleId& id, const std::string& text) override;

 private:
  ServiceOptions options_;
};

}  // namespace dialnoise
