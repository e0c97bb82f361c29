#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dialnoise/corpus.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/predictions.hpp"

namespace fixtures {

using namespace dialnoise;

/// MultiWOZ-shaped corpus: alternating user/system turns, cumulative belief
/// states on user turns (one new slot per user turn), values valid under
/// data/mwoz_schema.json. Deterministic in `seed`.
Corpus dst_corpus(std::size_t dialogues, std::size_t turns_per_dialogue, std::uint64_t seed);

/// Single-label classification corpus, every turn labeled from `labels`.
Corpus class_corpus(std::size_t dialogues, std::size_t turns_per_dialogue,
                    const std::vector<std::string>& labels, std::uint64_t seed);

/// The taxi booking exchange with a destination label.
Corpus taxi_dialogue();

std::shared_ptr<const OntologySchema> mwoz_schema();

/// Oracle predictions that reproduce the gold labels of `corpus` with
/// confident scores.
std::vector<PredictionRecord> oracle_dst_predictions(const Corpus& corpus, const std::string& predictor_id);
std::vector<PredictionRecord> oracle_class_predictions(const Corpus& corpus, const std::string& predictor_id,
                                                       const std::vector<std::string>& labels);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixtures
