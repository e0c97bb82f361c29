#include "dialnoise/predictions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "dialnoise/calibration.hpp"
#include "dialnoise/error.hpp"
#include "httplib.h"

namespace dialnoise {

std::string_view to_string(PredictionKind k) {
  return k == PredictionKind::classification ? "classification" : "dst";
}

PredictionKind parse_prediction_kind(std::string_view s) {
  if (s == "classification") return PredictionKind::classification;
  if (s == "dst") return PredictionKind::dst;
  throw SchemaError("unknown prediction kind '" + std::string(s) + "' (classification|dst)");
}

Json to_json(const PredictionRecord& r) {
  Json j = Json::object();
  j["example_id"] = r.example_id.str();
  j["predictor_id"] = r.predictor_id;
  j["kind"] = std::string(to_string(r.kind));
  if (r.kind == PredictionKind::classification) {
    Json a = Json::array();
    for (const auto& [label, logit] : r.candidates) {
      Json c = Json::object();
      c["label"] = label;
      c["logit"] = logit;
      a.push_back(std::move(c));
    }
    j["candidates"] = std::move(a);
  } else {
    Json a = Json::array();
    for (const auto& [sv, score] : r.state) {
      Json s = to_json(sv);
      s["score"] = score;
      a.push_back(std::move(s));
    }
    j["state"] = std::move(a);
  }
  return j;
}

namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing \"" + key + "\"");
  return j.at(key);
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) throw SchemaError(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

double number_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_number()) throw SchemaError(where + ": \"" + key + "\" must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + ": \"" + key + "\" must be finite");
  return d;
}

}  // namespace

PredictionRecord prediction_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("prediction: expected a JSON object");
  PredictionRecord r;
  const std::string id = string_field(j, "example_id", "prediction");
  const std::string where = "prediction " + id;
  try {
    r.example_id = ExampleId::parse(id);
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
  r.predictor_id = string_field(j, "predictor_id", where);
  if (r.predictor_id.empty()) throw SchemaError(where + ": predictor_id is empty");
  r.kind = parse_prediction_kind(string_field(j, "kind", where));
  if (r.kind == PredictionKind::classification) {
    if (j.contains("state")) throw SchemaError(where + ": classification record has \"state\"");
    const Json& cands = field(j, "candidates", where);
    if (!cands.is_array() || cands.empty())
      throw SchemaError(where + ": \"candidates\" must be a non-empty array");
    std::set<std::string> seen;
    for (const auto& c : cands) {
      if (!c.is_object()) throw SchemaError(where + ": candidate must be an object");
      std::string label = string_field(c, "label", where);
      if (!seen.insert(label).second) throw SchemaError(where + ": duplicate candidate '" + label + "'");
      r.candidates.emplace_back(std::move(label), number_field(c, "logit", where));
    }
  } else {
    if (j.contains("candidates")) throw SchemaError(where + ": dst record has \"candidates\"");
    const Json& state = field(j, "state", where);
    if (!state.is_array()) throw SchemaError(where + ": \"state\" must be an array");
    for (const auto& s : state) {
      if (!s.is_object()) throw SchemaError(where + ": state entry must be an object");
      SlotValue sv{string_field(s, "domain", where), string_field(s, "slot", where),
                   string_field(s, "value", where)};
      r.state.emplace_back(std::move(sv), number_field(s, "score", where));
    }
  }
  return r;
}

std::string dump_predictions(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions(std::string_view text, const std::string& source) {
  std::vector<PredictionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    try {
      out.push_back(prediction_from_json(j));
    } catch (const Error& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_predictions(ss.str(), path.string());
}

void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump_predictions(records);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string predicted_label(const PredictionRecord& r) {
  if (r.kind != PredictionKind::classification || r.candidates.empty())
    throw Error("prediction " + r.example_id.str() + " has no classification candidates");
  auto best = r.candidates.begin();
  for (auto it = r.candidates.begin(); it != r.candidates.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

namespace {

// (domain, slot) -> scored values, in listing order.
std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, double>>>
group_slots(const PredictionRecord& r) {
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, double>>> g;
  for (const auto& [sv, score] : r.state) g[{sv.domain, sv.slot}].emplace_back(sv.value, score);
  return g;
}

}  // namespace

std::vector<SlotValue> predicted_state(const PredictionRecord& r) {
  if (r.kind != PredictionKind::dst)
    throw Error("prediction " + r.example_id.str() + " is not a dst prediction");
  std::vector<SlotValue> out;
  for (const auto& [key, values] : group_slots(r)) {
    auto best = values.begin();
    for (auto it = values.begin(); it != values.end(); ++it)
      if (it->second > best->second) best = it;
    if (best->second > 0.0) out.push_back({key.first, key.second, best->first});
  }
  return out;
}

double prediction_confidence(const PredictionRecord& r, double temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (r.kind == PredictionKind::classification) {
    Eigen::VectorXd logits(static_cast<long>(r.candidates.size()));
    for (std::size_t i = 0; i < r.candidates.size(); ++i) logits[static_cast<long>(i)] = r.candidates[i].second;
    return tempered_softmax(logits, temperature).maxCoeff();
  }
  double conf = 1.0;
  for (const auto& [key, values] : group_slots(r)) {
    Eigen::VectorXd logits(static_cast<long>(values.size() + 1));
    for (std::size_t i = 0; i < values.size(); ++i) logits[static_cast<long>(i)] = values[i].second;
    logits[static_cast<long>(values.size())] = 0.0;
    conf = std::min(conf, tempered_softmax(logits, temperature).maxCoeff());
  }
  return conf;
}

Json post_json(const ServiceOptions& options, const std::string& path, const Json& body) {
  httplib::Client client(options.url);
  if (!client.is_valid()) throw Error("invalid service url '" + options.url + "'");
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  const std::string payload = body.dump();
  std::string last_error;
  for (unsigned attempt = 0; attempt <= options.retries; ++attempt) {
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(options.url + path + " answered HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
      return Json::parse(res->body);
    } catch (const Json::exception& e) {
      throw SchemaError(options.url + path + " returned invalid JSON: " + e.what());
    }
  }
  throw IoError(options.url + path + " failed after " + std::to_string(options.retries + 1) +
                " attempt(s): " + last_error);
}

PredictionClient::PredictionClient(ServiceOptions options) : options_(std::move(options)) {}

PredictionRecord PredictionClient::predict(const ExampleId& id, const Turn& turn) const {
  Json body = Json::object();
  body["example_id"] = id.str();
  body["context"] = to_json(turn);
  Json reply;
  try {
    reply = post_json(options_, "/predict", body);
  } catch (const IoError& e) {
    throw IoError("prediction for " + id.str() + ": " + e.what());
  }
  PredictionRecord r = prediction_from_json(reply);
  if (r.example_id != id)
    throw SchemaError("prediction service answered " + r.example_id.str() + " for " + id.str());
  return r;
}

std::vector<PredictionRecord> PredictionClient::predict_all(const Corpus& corpus,
                                                            const std::vector<ExampleId>& ids,
                                                            unsigned jobs) const {
  std::vector<PredictionRecord> out(ids.size());
  std::vector<std::exception_ptr> errors(ids.size());
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(ids.size(), 1));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < ids.size(); i += workers) {
      try {
        const Turn* t = find_turn(corpus, ids[i]);
        if (!t) throw Error("unknown example " + ids[i].str());
        out[i] = predict(ids[i], *t);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

FilePerturber::FilePerturber(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const Json j = Json::parse(line);
      texts_[ExampleId::parse(string_field(j, "example_id", where))] = string_field(j, "text", where);
    } catch (const Json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
}

std::string FilePerturber::perturb(const ExampleId& id, const std::string&) {
  auto it = texts_.find(id);
  if (it == texts_.end()) throw Error("no paraphrase for " + id.str());
  return it->second;
}

std::string HttpPerturber::perturb(const ExampleId& id, const std::string& text) {
  Json body = Json::object();
  body["example_id"] = id.str();
  body["text"] = text;
  const Json reply = post_json(options_, "/predict", body);
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
    throw SchemaError("paraphrase service reply for " + id.str() + " lacks a \"text\" string");
  return reply["text"].get<std::string>();
}

}  // namespace dialnoise
