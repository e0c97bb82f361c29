#include "dialnoise/denoiser.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

constexpr std::string_view kStepNames[] = {"ontology_clean", "filter_disagree", "coteach_pseudo"};

std::string list_ids(const std::vector<ExampleId>& ids) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) out += (i ? ", " : "") + ids[i].str();
  if (ids.size() > shown) out += ", ... (" + std::to_string(ids.size() - shown) + " more)";
  return out;
}

LabelTarget resolve_target(const Corpus& corpus, std::optional<LabelTarget> target) {
  if (target) return *target;
  return observed_labels(corpus, LabelTarget::class_labels).empty() ? LabelTarget::dialog_acts
                                                                    : LabelTarget::class_labels;
}

const std::vector<std::string>& labels_of(const Turn& t, LabelTarget target) {
  return target == LabelTarget::class_labels ? t.labels.class_labels : t.labels.dialog_acts;
}

// Index of predictions by id; rejects duplicates and mixed predictor ids.
std::map<ExampleId, const PredictionRecord*> index_predictions(const std::vector<PredictionRecord>& preds,
                                                               const char* role) {
  std::map<ExampleId, const PredictionRecord*> out;
  for (const auto& p : preds) {
    if (p.predictor_id != preds.front().predictor_id)
      throw Error(std::string(role) + " predictions mix predictor ids '" + preds.front().predictor_id +
                  "' and '" + p.predictor_id + "'");
    if (p.kind != preds.front().kind)
      throw Error(std::string(role) + " predictions mix classification and dst records");
    if (!out.emplace(p.example_id, &p).second)
      throw Error(std::string(role) + " predictions list " + p.example_id.str() + " twice");
  }
  return out;
}

void require_coverage(const std::vector<ExampleId>& ids,
                      const std::map<ExampleId, const PredictionRecord*>& preds, const char* role) {
  std::vector<ExampleId> missing;
  for (const auto& id : ids)
    if (!preds.count(id)) missing.push_back(id);
  if (!missing.empty())
    throw Error(std::string(role) + " predictions do not cover " + std::to_string(missing.size()) +
                " example(s): " + list_ids(missing));
}

std::set<SlotValue> folded_set(const std::vector<SlotValue>& state) {
  std::set<SlotValue> s;
  for (const auto& sv : state) s.insert({casefold(sv.domain), casefold(sv.slot), casefold(sv.value)});
  return s;
}

std::map<std::pair<std::string, std::string>, std::set<std::string>> slot_map(
    const std::vector<SlotValue>& state, const OntologySchema* schema) {
  std::map<std::pair<std::string, std::string>, std::set<std::string>> m;
  for (const auto& sv : state) {
    std::string value = sv.value;
    if (schema) {
      if (const FormatRule* rule = schema->rule_for(sv.domain, sv.slot))
        if (auto n = normalize_value(value, *rule, schema->merge_map)) value = *n;
    }
    m[{casefold(sv.domain), casefold(sv.slot)}].insert(casefold(value));
  }
  return m;
}

bool agrees(const Turn& turn, const PredictionRecord& p, MatchMode mode, const OntologySchema* schema,
            LabelTarget target) {
  if (p.kind == PredictionKind::classification) {
    const auto& gold = labels_of(turn, target);
    const std::string label = predicted_label(p);
    return std::find(gold.begin(), gold.end(), label) != gold.end();
  }
  const auto predicted = predicted_state(p);
  if (mode == MatchMode::exact_state) return folded_set(predicted) == folded_set(turn.labels.belief_state);
  return slot_map(predicted, schema) == slot_map(turn.labels.belief_state, schema);
}

PredictionKind kind_of(const std::vector<PredictionRecord>& a, const std::vector<PredictionRecord>& b,
                       const Corpus& corpus) {
  if (!a.empty()) return a.front().kind;
  if (!b.empty()) return b.front().kind;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns)
      if (!t.labels.belief_state.empty()) return PredictionKind::dst;
  return PredictionKind::classification;
}

}  // namespace

std::string_view to_string(DenoiseStep s) { return kStepNames[static_cast<std::size_t>(s)]; }

DenoiseStep parse_denoise_step(std::string_view s) {
  const std::string f = casefold(s);
  if (f == "ontology" || f == "ontology_clean") return DenoiseStep::ontology_clean;
  if (f == "filter" || f == "filter_disagree") return DenoiseStep::filter_disagree;
  if (f == "coteach" || f == "coteach_pseudo" || f == "co-teaching") return DenoiseStep::coteach_pseudo;
  throw ParseError("unknown denoising step '" + std::string(s) + "' (ontology|filter|coteach)");
}

MatchMode parse_match_mode(std::string_view s) {
  if (s == "exact_state") return MatchMode::exact_state;
  if (s == "per_slot") return MatchMode::per_slot;
  throw ParseError("unknown match mode '" + std::string(s) + "' (exact_state|per_slot)");
}

std::string ablation_name(const std::set<DenoiseStep>& steps) {
  using S = DenoiseStep;
  if (steps.empty()) return "Original";
  if (steps == std::set<S>{S::ontology_clean}) return "Ontology Clean";
  if (steps == std::set<S>{S::filter_disagree}) return "Filter Disagree";
  if (steps == std::set<S>{S::filter_disagree, S::coteach_pseudo}) return "Co-teaching";
  if (steps.size() == 3) return "Combined";
  std::string out;
  for (S s : steps) {
    if (!out.empty()) out += " + ";
    out += s == S::ontology_clean ? "Ontology Clean" : s == S::filter_disagree ? "Filter Disagree" : "Pseudo-label";
  }
  return out;
}

std::vector<ExampleId> denoise_examples(const Corpus& corpus, PredictionKind kind, LabelTarget target) {
  std::vector<ExampleId> ids;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) {
      const bool judged = kind == PredictionKind::dst ? t.speaker == Speaker::user
                                                      : !labels_of(t, target).empty();
      if (judged) ids.push_back({d.dialogue_id, t.turn_id});
    }
  std::sort(ids.begin(), ids.end());
  return ids;
}

FilterResult filter_disagreement(const Corpus& corpus, const std::vector<PredictionRecord>& predictions,
                                 MatchMode mode, const OntologySchema* schema,
                                 std::optional<LabelTarget> target) {
  if (predictions.empty()) throw Error("filter step needs predictions");
  const auto preds = index_predictions(predictions, "filter");
  const LabelTarget tgt = resolve_target(corpus, target);
  const PredictionKind kind = predictions.front().kind;
  const auto ids = denoise_examples(corpus, kind, tgt);
  require_coverage(ids, preds, "filter");
  const std::set<ExampleId> judged(ids.begin(), ids.end());

  FilterResult out{corpus, {}};
  for (auto& d : out.kept.dialogues) {
    std::vector<Turn> turns;
    for (auto& t : d.turns) {
      const ExampleId id{d.dialogue_id, t.turn_id};
      if (judged.count(id) && !agrees(t, *preds.at(id), mode, schema, tgt)) {
        out.stripped.push_back(id);
      } else {
        turns.push_back(std::move(t));
      }
    }
    d.turns = std::move(turns);
  }
  std::erase_if(out.kept.dialogues, [](const Dialogue& d) { return d.turns.empty(); });
  std::sort(out.stripped.begin(), out.stripped.end());
  return out;
}

std::vector<PseudoLabel> pseudo_label(const std::vector<ExampleId>& stripped,
                                      const std::vector<PredictionRecord>& second, double temperature,
                                      double threshold,
                                      const std::optional<std::string>& filter_predictor_id) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
  if (stripped.empty()) return {};
  if (second.empty()) throw Error("pseudo-labeling needs predictions from a second predictor");
  const auto preds = index_predictions(second, "pseudo-label");
  if (filter_predictor_id && *filter_predictor_id == second.front().predictor_id)
    throw Error("co-teaching needs two different predictors, but the filter predictor '" +
                *filter_predictor_id + "' and the pseudo-label predictor '" + second.front().predictor_id +
                "' are the same");
  std::vector<ExampleId> ids = stripped;
  std::sort(ids.begin(), ids.end());
  require_coverage(ids, preds, "pseudo-label");

  std::vector<PseudoLabel> out;
  for (const auto& id : ids) {
    const PredictionRecord& p = *preds.at(id);
    PseudoLabel pl{id, prediction_confidence(p, temperature), false, {}, {}};
    pl.accepted = pl.confidence > threshold;
    if (p.kind == PredictionKind::classification) {
      pl.labels = {predicted_label(p)};
    } else {
      pl.state = predicted_state(p);
    }
    out.push_back(std::move(pl));
  }
  return out;
}

DenoiseResult run_pipeline(const Corpus& corpus, const DenoiseConfig& config,
                           const std::vector<PredictionRecord>& predictions_a,
                           const std::vector<PredictionRecord>& predictions_b) {
  const auto& steps = config.steps;
  const bool do_ontology = steps.count(DenoiseStep::ontology_clean) > 0;
  const bool do_filter = steps.count(DenoiseStep::filter_disagree) > 0;
  const bool do_coteach = steps.count(DenoiseStep::coteach_pseudo) > 0;
  if (!(config.threshold > 0.0 && config.threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
  if (!(config.temperature > 0.0)) throw Error("temperature must be positive");
  if (do_coteach && !do_ontology && !do_filter)
    throw Error("co-teaching needs the ontology or filter step to supply stripped examples");
  if (do_coteach && !predictions_a.empty() && !predictions_b.empty() &&
      predictions_a.front().predictor_id == predictions_b.front().predictor_id)
    throw Error("co-teaching needs two different predictors, but predictions A and B both come from '" +
                predictions_a.front().predictor_id + "'");
  if (!predictions_a.empty() && !predictions_b.empty() && predictions_a.front().kind != predictions_b.front().kind)
    throw Error("predictions A and B disagree on kind (classification vs dst)");

  const PredictionKind kind = kind_of(predictions_a, predictions_b, corpus);
  const LabelTarget target = resolve_target(corpus, config.target);
  const auto examples = denoise_examples(corpus, kind, target);

  // Prediction ids must name turns of the input corpus.
  for (const auto* preds : {&predictions_a, &predictions_b}) {
    std::vector<ExampleId> unknown;
    for (const auto& p : *preds)
      if (!find_turn(corpus, p.example_id)) unknown.push_back(p.example_id);
    if (!unknown.empty())
      throw Error("predictions reference unknown example(s): " + list_ids(unknown));
  }

  std::map<ExampleId, ProvenanceEntry> prov;
  for (const auto& id : examples) prov[id] = {id, {}, "kept"};
  auto note = [&](const ExampleId& id, std::string event) {
    if (auto it = prov.find(id); it != prov.end()) it->second.events.push_back(std::move(event));
  };

  Corpus working = corpus;
  std::vector<ExampleId> pool;
  DenoiseCounts counts;
  counts.input = examples.size();

  if (do_ontology) {
    const auto schema = config.schema ? config.schema : corpus.ontology;
    if (!schema) throw Error("ontology cleaning needs a schema");
    CleaningOutcome outcome = clean_ontology(corpus, *schema, config.cleaning);
    for (const auto& n : outcome.normalized) note(n.example_id, "ontology_clean:normalized");
    const std::set<ExampleId> removed(outcome.removed_examples.begin(), outcome.removed_examples.end());
    for (const auto& d : outcome.dropped_values)
      if (!removed.count(d.example_id)) note(d.example_id, "ontology_clean:value_dropped");
    for (const auto& id : removed) {
      if (!prov.count(id)) continue;
      note(id, "ontology_clean:removed");
      prov[id].status = "ontology_removed";
      pool.push_back(id);
      ++counts.ontology_removed;
    }
    working = std::move(outcome.clean_corpus);
    working.ontology = corpus.ontology;
  }

  if (do_filter) {
    if (predictions_a.empty()) throw Error("filter step needs predictions A");
    const auto schema = config.schema ? config.schema : corpus.ontology;
    FilterResult fr = filter_disagreement(working, predictions_a, config.match_mode, schema.get(), target);
    for (const auto& id : fr.stripped) {
      if (!prov.count(id)) continue;
      note(id, "filter_disagree:stripped");
      prov[id].status = "filter_removed";
      pool.push_back(id);
      ++counts.filter_removed;
    }
    working = std::move(fr.kept);
  }

  std::map<ExampleId, PseudoLabel> readded;
  if (do_coteach) {
    std::optional<std::string> filter_id;
    if (!predictions_a.empty()) filter_id = predictions_a.front().predictor_id;
    for (auto& pl : pseudo_label(pool, predictions_b, config.temperature, config.threshold, filter_id)) {
      std::ostringstream ev;
      ev << "coteach_pseudo:" << (pl.accepted ? "readded" : "excluded") << " confidence=" << pl.confidence;
      note(pl.example_id, ev.str());
      if (pl.accepted) {
        prov[pl.example_id].status = "pseudo_readded";
        ++counts.pseudo_readded;
        readded.emplace(pl.example_id, std::move(pl));
      }
    }
  }

  // Rebuild in input order: surviving turns as the steps left them,
  // re-added turns with their labels replaced.
  std::map<ExampleId, const Turn*> survivors;
  for (const auto& d : working.dialogues)
    for (const auto& t : d.turns) survivors[{d.dialogue_id, t.turn_id}] = &t;
  DenoiseResult result;
  result.clean_corpus = corpus;
  result.clean_corpus.dialogues.clear();
  for (const auto& d : corpus.dialogues) {
    Dialogue out{d.dialogue_id, d.domains, {}};
    for (const auto& t : d.turns) {
      const ExampleId id{d.dialogue_id, t.turn_id};
      if (auto s = survivors.find(id); s != survivors.end()) {
        out.turns.push_back(*s->second);
      } else if (auto r = readded.find(id); r != readded.end()) {
        Turn turn = t;
        if (kind == PredictionKind::dst) {
          turn.labels.belief_state = r->second.state;
        } else if (target == LabelTarget::class_labels) {
          turn.labels.class_labels = r->second.labels;
        } else {
          turn.labels.dialog_acts = r->second.labels;
        }
        out.turns.push_back(std::move(turn));
      }
    }
    if (!out.turns.empty()) result.clean_corpus.dialogues.push_back(std::move(out));
  }

  for (const auto& id : examples)
    if (survivors.count(id)) ++counts.kept;
  counts.output = counts.kept + counts.pseudo_readded;
  result.counts = counts;
  result.ablation_name = ablation_name(steps);
  for (auto& [id, entry] : prov) result.provenance.push_back(std::move(entry));
  return result;
}

Json to_json(const DenoiseResult& r) {
  Json j = Json::object();
  j["ablation_name"] = r.ablation_name;
  Json c = Json::object();
  c["input"] = r.counts.input;
  c["kept"] = r.counts.kept;
  c["ontology_removed"] = r.counts.ontology_removed;
  c["filter_removed"] = r.counts.filter_removed;
  c["pseudo_readded"] = r.counts.pseudo_readded;
  c["output"] = r.counts.output;
  j["counts"] = std::move(c);
  Json prov = Json::array();
  for (const auto& p : r.provenance) {
    Json e = Json::object();
    e["example_id"] = p.example_id.str();
    e["status"] = p.status;
    e["events"] = p.events;
    prov.push_back(std::move(e));
  }
  j["provenance"] = std::move(prov);
  return j;
}

std::string render_denoise(const DenoiseResult& r) {
  std::ostringstream out;
  out << "condition         " << r.ablation_name << "\n"
      << "examples in       " << r.counts.input << "\n"
      << "kept              " << r.counts.kept << "\n"
      << "ontology removed  " << r.counts.ontology_removed << "\n"
      << "filter removed    " << r.counts.filter_removed << "\n"
      << "pseudo re-added   " << r.counts.pseudo_readded << "\n"
      << "examples out      " << r.counts.output << "\n";
  return out.str();
}

}  // namespace dialnoise
