#include "dialnoise/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dialnoise/error.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/random.hpp"

namespace dialnoise {

namespace {

constexpr std::string_view kTaskNames[] = {"CLC", "TLC", "DST", "RG", "IR"};

// Field access with a JSON-path-ish location for error messages.
const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": expected object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key + ": missing field");
  return *it;
}

std::string string_field(const Json& j, const char* key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_string()) throw SchemaError(path + "." + key + ": expected string");
  return v.get<std::string>();
}

std::int64_t int_field(const Json& j, const char* key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + "." + key + ": expected integer");
  return v.get<std::int64_t>();
}

const Json& array_field(const Json& j, const char* key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_array()) throw SchemaError(path + "." + key + ": expected array");
  return v;
}

std::vector<std::string> string_list(const Json& j, const char* key,
                                     const std::string& path) {
  const Json& arr = array_field(j, key, path);
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string())
      throw SchemaError(path + "." + key + "[" + std::to_string(i) + "]: expected string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

std::string describe_json_error(const nlohmann::json::parse_error& e,
                                std::string_view text) {
  std::size_t line = 1;
  std::size_t column = 1;
  const std::size_t limit = std::min<std::size_t>(e.byte, text.size());
  for (std::size_t i = 0; i + 1 < limit; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  std::ostringstream out;
  out << "JSON parse error at line " << line << ", column " << column << ": "
      << e.what();
  return out.str();
}

}  // namespace

std::string ExampleId::str() const {
  return dialogue_id + ":" + std::to_string(turn_id);
}

ExampleId ExampleId::parse(std::string_view s) {
  auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == s.size())
    throw ParseError("malformed example id '" + std::string(s) + "'");
  ExampleId id;
  id.dialogue_id = std::string(s.substr(0, colon));
  std::string digits(s.substr(colon + 1));
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw ParseError("malformed example id '" + std::string(s) + "'");
  id.turn_id = std::stoll(digits);
  return id;
}

std::string_view to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }

std::string_view to_string(TaskKind k) { return kTaskNames[static_cast<int>(k)]; }

Speaker parse_speaker(std::string_view s) {
  if (s == "user") return Speaker::user;
  if (s == "system") return Speaker::system;
  throw SchemaError("unknown speaker '" + std::string(s) + "'");
}

TaskKind parse_task_kind(std::string_view s) {
  for (int i = 0; i < 5; ++i)
    if (kTaskNames[i] == s) return static_cast<TaskKind>(i);
  throw SchemaError("unknown task kind '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string casefold(std::string_view s) {
  std::string out = trim(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

Json to_json(const SlotValue& sv) {
  Json j = Json::object();
  j["domain"] = sv.domain;
  j["slot"] = sv.slot;
  j["value"] = sv.value;
  return j;
}

Json to_json(const Turn& turn) {
  Json labels = Json::object();
  labels["class_labels"] = turn.labels.class_labels;
  labels["dialog_acts"] = turn.labels.dialog_acts;
  Json state = Json::array();
  for (const auto& sv : turn.labels.belief_state) state.push_back(to_json(sv));
  labels["belief_state"] = std::move(state);
  Json spans = Json::array();
  for (const auto& span : turn.labels.spans) {
    Json s = Json::object();
    s["label"] = span.label;
    s["start"] = span.start;
    s["end"] = span.end;
    spans.push_back(std::move(s));
  }
  labels["spans"] = std::move(spans);
  labels["reference_response"] =
      turn.labels.reference_response ? Json(*turn.labels.reference_response) : Json(nullptr);

  Json j = Json::object();
  j["turn_id"] = turn.turn_id;
  j["speaker"] = to_string(turn.speaker);
  j["text"] = turn.text;
  j["labels"] = std::move(labels);
  return j;
}

Json to_json(const Corpus& corpus) {
  Json j = Json::object();
  j["name"] = corpus.name;
  Json kinds = Json::array();
  for (auto k : corpus.task_kinds) kinds.push_back(to_string(k));
  j["task_kinds"] = std::move(kinds);
  Json dialogues = Json::array();
  for (const auto& d : corpus.dialogues) {
    Json dj = Json::object();
    dj["dialogue_id"] = d.dialogue_id;
    dj["domains"] = d.domains;
    Json turns = Json::array();
    for (const auto& t : d.turns) turns.push_back(to_json(t));
    dj["turns"] = std::move(turns);
    dialogues.push_back(std::move(dj));
  }
  j["dialogues"] = std::move(dialogues);
  return j;
}

Turn turn_from_json(const Json& j, const std::string& path) {
  Turn t;
  t.turn_id = int_field(j, "turn_id", path);
  try {
    t.speaker = parse_speaker(string_field(j, "speaker", path));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ".speaker: " + e.what());
  }
  t.text = string_field(j, "text", path);
  const Json& labels = field(j, "labels", path);
  const std::string lp = path + ".labels";
  t.labels.class_labels = string_list(labels, "class_labels", lp);
  t.labels.dialog_acts = string_list(labels, "dialog_acts", lp);
  const Json& state = array_field(labels, "belief_state", lp);
  for (std::size_t i = 0; i < state.size(); ++i) {
    const std::string sp = lp + ".belief_state[" + std::to_string(i) + "]";
    t.labels.belief_state.push_back({string_field(state[i], "domain", sp),
                                     string_field(state[i], "slot", sp),
                                     string_field(state[i], "value", sp)});
  }
  const Json& spans = array_field(labels, "spans", lp);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string sp = lp + ".spans[" + std::to_string(i) + "]";
    t.labels.spans.push_back({string_field(spans[i], "label", sp),
                              int_field(spans[i], "start", sp),
                              int_field(spans[i], "end", sp)});
  }
  const Json& ref = field(labels, "reference_response", lp);
  if (ref.is_string()) {
    t.labels.reference_response = ref.get<std::string>();
  } else if (!ref.is_null()) {
    throw SchemaError(lp + ".reference_response: expected string or null");
  }
  return t;
}

Corpus corpus_from_json(const Json& j) {
  Corpus c;
  c.name = string_field(j, "name", "$");
  std::set<TaskKind> kinds;
  for (const auto& k : string_list(j, "task_kinds", "$")) {
    try {
      kinds.insert(parse_task_kind(k));
    } catch (const SchemaError& e) {
      throw SchemaError(std::string("$.task_kinds: ") + e.what());
    }
  }
  c.task_kinds.assign(kinds.begin(), kinds.end());
  const Json& dialogues = array_field(j, "dialogues", "$");
  c.dialogues.reserve(dialogues.size());
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const std::string dp = "$.dialogues[" + std::to_string(i) + "]";
    Dialogue d;
    d.dialogue_id = string_field(dialogues[i], "dialogue_id", dp);
    auto domains = string_list(dialogues[i], "domains", dp);
    std::sort(domains.begin(), domains.end());
    domains.erase(std::unique(domains.begin(), domains.end()), domains.end());
    d.domains = std::move(domains);
    const Json& turns = array_field(dialogues[i], "turns", dp);
    d.turns.reserve(turns.size());
    for (std::size_t t = 0; t < turns.size(); ++t)
      d.turns.push_back(turn_from_json(turns[t], dp + ".turns[" + std::to_string(t) + "]"));
    c.dialogues.push_back(std::move(d));
  }
  return c;
}

std::string dump_corpus(const Corpus& corpus) {
  try {
    return to_json(corpus).dump(2) + "\n";
  } catch (const nlohmann::json::type_error& e) {
    throw Error(std::string("corpus contains text that is not valid UTF-8: ") + e.what());
  }
}

Corpus parse_corpus(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(describe_json_error(e, text));
  }
  Corpus c = corpus_from_json(j);
  auto violations = validate_corpus(c);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "schema violation: " << violations.size() << " problem(s); first: dialogue '"
        << violations.front().dialogue_id << "'";
    if (violations.front().turn_id) msg << " turn " << *violations.front().turn_id;
    msg << ": " << violations.front().rule << " (" << violations.front().detail << ")";
    throw SchemaError(msg.str());
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_corpus(buf.str());
  } catch (const Error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const std::string bytes = dump_corpus(corpus);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  out << bytes;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_corpus(const Corpus& corpus) {
  std::vector<Violation> out;
  std::set<std::string> seen_ids;
  for (const auto& d : corpus.dialogues) {
    if (d.dialogue_id.empty()) out.push_back({d.dialogue_id, std::nullopt, "empty_dialogue_id", ""});
    if (!seen_ids.insert(d.dialogue_id).second)
      out.push_back({d.dialogue_id, std::nullopt, "duplicate_dialogue_id",
                     "dialogue id appears more than once"});
    std::int64_t prev = -1;
    for (const auto& t : d.turns) {
      if (t.turn_id < 0 || t.turn_id <= prev)
        out.push_back({d.dialogue_id, t.turn_id, "turn_id_order",
                       "turn ids must be strictly increasing and non-negative"});
      prev = t.turn_id;
      if (t.text.empty() && t.labels.dialog_acts.empty())
        out.push_back({d.dialogue_id, t.turn_id, "empty_text",
                       "text may only be empty on action turns"});
      const auto len = static_cast<std::int64_t>(t.text.size());
      for (const auto& span : t.labels.spans) {
        if (span.start < 0 || span.start > span.end || span.end > len)
          out.push_back({d.dialogue_id, t.turn_id, "span_bounds",
                         "span '" + span.label + "' [" + std::to_string(span.start) + "," +
                             std::to_string(span.end) + ") outside text of length " +
                             std::to_string(len)});
      }
      std::set<std::pair<std::string, std::string>> slots;
      for (const auto& sv : t.labels.belief_state) {
        if (sv.domain.empty() || sv.slot.empty() || sv.value.empty())
          out.push_back({d.dialogue_id, t.turn_id, "empty_slot_field",
                         sv.domain + "." + sv.slot + "=" + sv.value});
        if (!slots.insert({sv.domain, sv.slot}).second)
          out.push_back({d.dialogue_id, t.turn_id, "duplicate_slot",
                         sv.domain + "." + sv.slot + " appears twice"});
        if (corpus.ontology && !corpus.ontology->covers(sv.domain, sv.slot))
          out.push_back({d.dialogue_id, t.turn_id, "unknown_slot",
                         sv.domain + "." + sv.slot + " not in ontology"});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

std::size_t quota(double rate, std::size_t n) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("rate must lie in [0, 1]");
  const double product = rate * static_cast<double>(n);
  const double nearest = std::round(product);
  const double tolerance = 1e-9 * std::max(1.0, static_cast<double>(n));
  double count = std::abs(product - nearest) < tolerance ? nearest : std::ceil(product);
  return std::min(n, static_cast<std::size_t>(count));
}

std::vector<ExampleId> rank_units(std::vector<ExampleId> ids, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    keys[i] = {example_seed(seed, ids[i].dialogue_id, ids[i].turn_id, 0x5e1ec7), i};
  std::sort(keys.begin(), keys.end());
  std::vector<ExampleId> out;
  out.reserve(ids.size());
  for (const auto& k : keys) out.push_back(std::move(ids[k.second]));
  return out;
}

Selection select_units(std::vector<ExampleId> ids, double rate, std::uint64_t seed) {
  Selection sel;
  sel.seed = seed;
  sel.rate = rate;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t k = quota(rate, ids.size());
  if (k == ids.size()) {
    sel.example_ids = std::move(ids);
    return sel;
  }
  auto ranked = rank_units(std::move(ids), seed);
  ranked.resize(k);
  std::sort(ranked.begin(), ranked.end());
  sel.example_ids = std::move(ranked);
  return sel;
}

std::vector<ExampleId> all_turn_ids(const Corpus& corpus) {
  std::vector<ExampleId> ids;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) ids.push_back({d.dialogue_id, t.turn_id});
  return ids;
}

Selection sample_examples(const Corpus& corpus, double rate, std::uint64_t seed,
                          SampleUnit unit) {
  if (unit == SampleUnit::turn) return select_units(all_turn_ids(corpus), rate, seed);
  // Dialogue units are encoded with turn_id -1.
  std::vector<ExampleId> ids;
  for (const auto& d : corpus.dialogues) ids.push_back({d.dialogue_id, -1});
  return select_units(std::move(ids), rate, seed);
}

const Turn* find_turn(const Corpus& corpus, const ExampleId& id) {
  for (const auto& d : corpus.dialogues) {
    if (d.dialogue_id != id.dialogue_id) continue;
    for (const auto& t : d.turns)
      if (t.turn_id == id.turn_id) return &t;
  }
  return nullptr;
}

Turn* find_turn(Corpus& corpus, const ExampleId& id) {
  return const_cast<Turn*>(find_turn(static_cast<const Corpus&>(corpus), id));
}

// ---------------------------------------------------------------------------
// Stats

StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport r;
  r.label_counts = {{"class_labels", 0}, {"dialog_acts", 0}, {"belief_state", 0},
                    {"spans", 0}, {"reference_response", 0}};
  r.dialogue_count = corpus.dialogues.size();
  for (const auto& d : corpus.dialogues) {
    for (const auto& dom : d.domains) ++r.domain_counts[dom];
    for (const auto& t : d.turns) {
      ++r.turn_count;
      (t.speaker == Speaker::user ? r.user_turns : r.system_turns)++;
      if (t.text.empty()) ++r.action_only_turns;
      r.label_counts["class_labels"] += t.labels.class_labels.size();
      r.label_counts["dialog_acts"] += t.labels.dialog_acts.size();
      r.label_counts["belief_state"] += t.labels.belief_state.size();
      r.label_counts["spans"] += t.labels.spans.size();
      r.label_counts["reference_response"] += t.labels.reference_response ? 1 : 0;
    }
  }
  return r;
}

Json to_json(const StatsReport& r) {
  Json j = Json::object();
  j["dialogue_count"] = r.dialogue_count;
  j["turn_count"] = r.turn_count;
  j["user_turns"] = r.user_turns;
  j["system_turns"] = r.system_turns;
  j["action_only_turns"] = r.action_only_turns;
  Json labels = Json::object();
  for (const auto& [k, v] : r.label_counts) labels[k] = v;
  j["label_counts"] = std::move(labels);
  Json domains = Json::object();
  for (const auto& [k, v] : r.domain_counts) domains[k] = v;
  j["domain_counts"] = std::move(domains);
  return j;
}

std::string render_stats(const StatsReport& r) {
  std::ostringstream out;
  out << "dialogues          " << r.dialogue_count << "\n"
      << "turns              " << r.turn_count << "\n"
      << "  user             " << r.user_turns << "\n"
      << "  system           " << r.system_turns << "\n"
      << "  action-only      " << r.action_only_turns << "\n"
      << "labels\n";
  for (const auto& [k, v] : r.label_counts) {
    out << "  " << k << std::string(k.size() < 17 ? 17 - k.size() : 1, ' ') << v << "\n";
  }
  out << "domains\n";
  for (const auto& [k, v] : r.domain_counts) {
    out << "  " << k << std::string(k.size() < 17 ? 17 - k.size() : 1, ' ') << v << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// MultiWOZ import

Corpus import_multiwoz(const Json& data, std::string name) {
  if (!data.is_object()) throw SchemaError("MultiWOZ data must be an object keyed by dialogue id");
  Corpus corpus;
  corpus.name = std::move(name);
  corpus.task_kinds = {TaskKind::TLC, TaskKind::DST};
  for (const auto& [dialogue_id, body] : data.items()) {
    const std::string path = "$[\"" + dialogue_id + "\"]";
    const Json& log = array_field(body, "log", path);
    Dialogue d;
    d.dialogue_id = dialogue_id;
    std::set<std::string> domains;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const std::string tp = path + ".log[" + std::to_string(i) + "]";
      Turn t;
      t.turn_id = static_cast<std::int64_t>(i);
      t.speaker = i % 2 == 0 ? Speaker::user : Speaker::system;
      t.text = string_field(log[i], "text", tp);
      if (auto acts = log[i].find("dialog_act"); acts != log[i].end() && acts->is_object()) {
        for (const auto& [act, args] : acts->items()) {
          std::string lowered = casefold(act);
          t.labels.dialog_acts.push_back(lowered);
        }
      }
      if (t.speaker == Speaker::user && i + 1 < log.size()) {
        auto meta = log[i + 1].find("metadata");
        if (meta != log[i + 1].end() && meta->is_object()) {
          for (const auto& [domain, parts] : meta->items()) {
            auto add = [&](const Json& slots, const std::string& prefix) {
              if (!slots.is_object()) return;
              for (const auto& [slot, value] : slots.items()) {
                if (slot == "booked" || !value.is_string()) continue;
                std::string v = trim(value.get<std::string>());
                if (v.empty() || v == "not mentioned") continue;
                t.labels.belief_state.push_back({casefold(domain), prefix + casefold(slot), v});
                domains.insert(casefold(domain));
              }
            };
            if (auto semi = parts.find("semi"); semi != parts.end()) add(*semi, "");
            if (auto book = parts.find("book"); book != parts.end()) add(*book, "book_");
          }
        }
        std::sort(t.labels.belief_state.begin(), t.labels.belief_state.end());
      }
      d.turns.push_back(std::move(t));
    }
    d.domains.assign(domains.begin(), domains.end());
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace dialnoise
