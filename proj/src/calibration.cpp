#include "dialnoise/calibration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

Eigen::VectorXd logits_of(const LogitRecord& r) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(r.candidates.size()));
  for (std::size_t i = 0; i < r.candidates.size(); ++i) v[static_cast<Eigen::Index>(i)] = r.candidates[i].second;
  return v;
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("temperature must be positive and finite");
}

Eigen::Index gold_index(const LogitRecord& r) {
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    if (r.candidates[i].first == *r.gold) return static_cast<Eigen::Index>(i);
  return -1;
}

}  // namespace

Eigen::VectorXd tempered_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature) {
  check_temperature(temperature);
  if (logits.size() == 0) throw Error("softmax of an empty logit vector");
  Eigen::ArrayXd z = logits.array() / temperature;
  z = (z - z.maxCoeff()).exp();
  return (z / z.sum()).matrix();
}

Eigen::Index argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<std::pair<std::string, double>> apply_temperature(const LogitRecord& record,
                                                              double temperature) {
  if (record.candidates.empty()) throw Error("record " + record.example_id + " has no candidates");
  Eigen::VectorXd p = tempered_softmax(logits_of(record), temperature);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(record.candidates.size());
  for (std::size_t i = 0; i < record.candidates.size(); ++i)
    out.emplace_back(record.candidates[i].first, p[static_cast<Eigen::Index>(i)]);
  return out;
}

const std::vector<double>& default_temperature_grid() {
  static const std::vector<double> grid = {1.3, 1.5, 1.7, 1.9};
  return grid;
}

double mean_nll(std::span<const LogitRecord> records, double temperature) {
  if (records.empty()) throw Error("mean_nll: no records");
  std::vector<std::string> missing;
  double total = 0.0;
  for (const auto& r : records) {
    const Eigen::Index g = r.gold ? gold_index(r) : -1;
    if (g < 0) {
      missing.push_back(r.example_id);
      continue;
    }
    Eigen::ArrayXd z = logits_of(r).array() / temperature;
    const double m = z.maxCoeff();
    // log-sum-exp form avoids log(0) for very peaked distributions
    total += m + std::log((z - m).exp().sum()) - z[g];
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    throw Error("gold label missing or not among candidates for " + std::to_string(missing.size()) +
                " record(s): " + list);
  }
  return total / static_cast<double>(records.size());
}

TemperatureFit fit_temperature(std::span<const LogitRecord> dev, std::span<const double> grid) {
  if (grid.empty()) throw Error("fit_temperature: empty grid");
  for (double t : grid) check_temperature(t);
  TemperatureFit fit;
  fit.baseline_nll = mean_nll(dev, 1.0);
  double best_nll = 0.0;
  bool first = true;
  for (double t : grid) {
    const double nll = mean_nll(dev, t);
    fit.nll_per_temperature.emplace_back(t, nll);
    if (first || nll < best_nll || (nll == best_nll && t < fit.temperature)) {
      best_nll = nll;
      fit.temperature = t;
      first = false;
    }
  }
  return fit;
}

double expected_calibration_error(std::span<const LogitRecord> records, double temperature,
                                  std::size_t bins) {
  if (bins == 0) throw Error("ECE needs at least one bin");
  if (records.empty()) return 0.0;
  std::vector<double> conf_sum(bins, 0.0), correct(bins, 0.0), count(bins, 0.0);
  for (const auto& r : records) {
    if (!r.gold) throw Error("ECE: record " + r.example_id + " has no gold label");
    Eigen::VectorXd p = tempered_softmax(logits_of(r), temperature);
    const Eigen::Index top = argmax(p);
    const double c = p[top];
    auto b = static_cast<std::size_t>(std::floor(c * static_cast<double>(bins)));
    if (b >= bins) b = bins - 1;
    conf_sum[b] += c;
    count[b] += 1.0;
    correct[b] += r.candidates[static_cast<std::size_t>(top)].first == *r.gold ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(records.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    ece += count[b] / n * std::abs(correct[b] / count[b] - conf_sum[b] / count[b]);
  }
  return ece;
}

LogitRecord logit_record_from_json(const Json& j) {
  LogitRecord r;
  if (!j.is_object()) throw SchemaError("logit record: expected object");
  if (!j.contains("example_id") || !j["example_id"].is_string())
    throw SchemaError("logit record: missing example_id");
  r.example_id = j["example_id"].get<std::string>();
  if (!j.contains("candidates") || !j["candidates"].is_array() || j["candidates"].empty())
    throw SchemaError("logit record " + r.example_id + ": needs a non-empty candidates array");
  for (const auto& c : j["candidates"]) {
    if (!c.contains("label") || !c.contains("logit") || !c["logit"].is_number())
      throw SchemaError("logit record " + r.example_id + ": candidate needs label and logit");
    const double logit = c["logit"].get<double>();
    if (!std::isfinite(logit)) throw SchemaError("logit record " + r.example_id + ": non-finite logit");
    r.candidates.emplace_back(c["label"].get<std::string>(), logit);
  }
  if (j.contains("gold") && j["gold"].is_string()) r.gold = j["gold"].get<std::string>();
  return r;
}

Json to_json(const LogitRecord& r) {
  Json j = Json::object();
  j["example_id"] = r.example_id;
  Json cands = Json::array();
  for (const auto& [label, logit] : r.candidates) {
    Json c = Json::object();
    c["label"] = label;
    c["logit"] = logit;
    cands.push_back(std::move(c));
  }
  j["candidates"] = std::move(cands);
  j["gold"] = r.gold ? Json(*r.gold) : Json(nullptr);
  return j;
}

std::vector<LogitRecord> load_logit_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open logit file " + path.string());
  std::vector<LogitRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(logit_record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Json to_json(const TemperatureFit& fit) {
  Json j = Json::object();
  j["temperature"] = fit.temperature;
  j["baseline_nll"] = fit.baseline_nll;
  Json rows = Json::array();
  for (const auto& [t, nll] : fit.nll_per_temperature) {
    Json row = Json::object();
    row["temperature"] = t;
    row["nll"] = nll;
    rows.push_back(std::move(row));
  }
  j["grid"] = std::move(rows);
  return j;
}

std::string render_fit(const TemperatureFit& fit) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "temperature   mean NLL\n";
  out << "1.0 (base)    " << fit.baseline_nll << "\n";
  for (const auto& [t, nll] : fit.nll_per_temperature) {
    std::ostringstream ts;
    ts << t;
    std::string label = ts.str().substr(0, ts.str().find_last_not_of('0') + 1);
    if (!label.empty() && label.back() == '.') label += "0";
    if (t == fit.temperature) label += " *";
    out << label << std::string(label.size() < 14 ? 14 - label.size() : 1, ' ') << nll << "\n";
  }
  return out.str();
}

}  // namespace dialnoise
