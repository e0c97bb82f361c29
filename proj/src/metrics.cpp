#include "dialnoise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

using StateKey = std::set<std::tuple<std::string, std::string, std::string>>;

StateKey folded(const BeliefState& s) {
  StateKey out;
  for (const auto& sv : s) out.emplace(casefold(sv.domain), casefold(sv.slot), casefold(sv.value));
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts out;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                   tokens.begin() + static_cast<long>(i + un))];
  return out;
}

struct BleuStats {
  std::vector<double> matches;
  std::vector<double> totals;
  double candidate_length = 0.0;
  double reference_length = 0.0;
};

void accumulate_sentence(BleuStats& stats, const std::vector<std::string>& cand,
                         const std::vector<std::vector<std::string>>& refs, int max_n) {
  for (int n = 1; n <= max_n; ++n) {
    NgramCounts c = ngrams(cand, n);
    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    double m = 0.0;
    double total = 0.0;
    for (const auto& [g, k] : c) {
      total += static_cast<double>(k);
      auto it = max_ref.find(g);
      if (it != max_ref.end()) m += static_cast<double>(std::min(k, it->second));
    }
    stats.matches[static_cast<std::size_t>(n - 1)] += m;
    stats.totals[static_cast<std::size_t>(n - 1)] += total;
  }
  const auto c = static_cast<double>(cand.size());
  double best = std::numeric_limits<double>::infinity();
  double closest = 0.0;
  for (const auto& r : refs) {
    const auto len = static_cast<double>(r.size());
    const double diff = std::abs(len - c);
    if (diff < best || (diff == best && len < closest)) {
      best = diff;
      closest = len;
    }
  }
  stats.candidate_length += c;
  stats.reference_length += closest;
}

double finish_bleu(const BleuStats& s, int max_n) {
  if (s.matches[0] == 0.0) return 0.0;
  double log_sum = std::log(s.matches[0] / s.totals[0]);
  for (int n = 2; n <= max_n; ++n) {
    const auto i = static_cast<std::size_t>(n - 1);
    log_sum += std::log((s.matches[i] + 1.0) / (s.totals[i] + 1.0));
  }
  const double bp = s.candidate_length > s.reference_length
                        ? 1.0
                        : std::exp(1.0 - s.reference_length / s.candidate_length);
  return bp * std::exp(log_sum / max_n);
}

}  // namespace

double joint_goal_accuracy(std::span<const BeliefState> predicted, std::span<const BeliefState> gold) {
  if (predicted.size() != gold.size())
    throw Error("joint_goal_accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                std::to_string(gold.size()) + " gold states");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += folded(predicted[i]) == folded(gold[i]);
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double joint_goal_accuracy(const std::map<std::string, BeliefState>& predicted,
                           const std::map<std::string, BeliefState>& gold) {
  std::vector<BeliefState> p, g;
  for (const auto& [id, state] : gold) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw Error("joint_goal_accuracy: no prediction for " + id);
    p.push_back(it->second);
    g.push_back(state);
  }
  if (predicted.size() != gold.size())
    throw Error("joint_goal_accuracy: predictions contain ids absent from gold");
  return joint_goal_accuracy(p, g);
}

double classification_accuracy(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size())
    throw Error("classification_accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                std::to_string(gold.size()) + " gold labels");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double bleu(std::string_view candidate, const std::vector<std::string>& references, int max_n) {
  if (max_n < 1) throw Error("bleu: max_n must be >= 1");
  auto cand = tokenize(candidate);
  if (cand.empty() || references.empty()) throw Error("bleu: empty candidate or references");
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(tokenize(r));
  BleuStats stats{std::vector<double>(static_cast<std::size_t>(max_n), 0.0),
                  std::vector<double>(static_cast<std::size_t>(max_n), 0.0), 0.0, 0.0};
  accumulate_sentence(stats, cand, refs, max_n);
  return finish_bleu(stats, max_n);
}

double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::vector<std::string>>& references, int max_n) {
  if (candidates.size() != references.size() || candidates.empty())
    throw Error("corpus_bleu: candidates and references must be non-empty and aligned");
  BleuStats stats{std::vector<double>(static_cast<std::size_t>(max_n), 0.0),
                  std::vector<double>(static_cast<std::size_t>(max_n), 0.0), 0.0, 0.0};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references[i]) refs.push_back(tokenize(r));
    if (refs.empty()) throw Error("corpus_bleu: candidate without references");
    accumulate_sentence(stats, tokenize(candidates[i]), refs, max_n);
  }
  if (stats.candidate_length == 0.0) throw Error("corpus_bleu: all candidates empty");
  return finish_bleu(stats, max_n);
}

Degradation degradation(const ScorePair& pair) {
  if (pair.clean_score == 0.0) throw Error("degradation: clean score is zero");
  Degradation d;
  d.absolute = pair.clean_score - pair.noisy_score;
  d.percent = d.absolute / pair.clean_score * 100.0;
  return d;
}

double noisy_from_degradation(double clean, double percent) { return clean * (1.0 - percent / 100.0); }

double clean_from_degradation(double noisy, double percent) {
  if (percent >= 100.0) throw Error("clean_from_degradation: percent must be < 100");
  return noisy / (1.0 - percent / 100.0);
}

Improvement relative_improvement(double baseline, double improved) {
  if (!(baseline > 0.0)) throw Error("relative_improvement: baseline must be positive");
  Improvement i;
  i.absolute = improved - baseline;
  i.relative = i.absolute / baseline * 100.0;
  return i;
}

std::map<std::string, TaskSummary> aggregate_by_task(
    const std::vector<std::pair<std::string, double>>& rows) {
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& [task, value] : rows) grouped[task].push_back(value);
  std::map<std::string, TaskSummary> out;
  for (auto& [task, values] : grouped) {
    std::sort(values.begin(), values.end());
    TaskSummary s;
    s.count = values.size();
    const std::size_t mid = values.size() / 2;
    s.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    s.average = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    out[task] = s;
  }
  return out;
}

LogCurveFit fit_log_curve(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw Error("fit_log_curve: need at least 3 points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [level, score] = points[static_cast<std::size_t>(i)];
    if (level < 0.0) throw Error("fit_log_curve: noise levels must be >= 0");
    design(i, 0) = std::log(level + kLogCurveEpsilon);
    design(i, 1) = 1.0;
    y[i] = score;
  }
  const double spread = design.col(0).maxCoeff() - design.col(0).minCoeff();
  if (spread == 0.0) throw Error("fit_log_curve: all noise levels are equal");
  Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  LogCurveFit fit;
  fit.a = coef[0];
  fit.b = coef[1];
  fit.residual = (design * coef - y).squaredNorm();
  return fit;
}

ImpactReport build_impact_report(std::vector<ImpactRow> rows) {
  ImpactReport report;
  std::vector<std::pair<std::string, double>> by_task;
  for (auto& row : rows) {
    row.degradation_percent = degradation({row.clean_score, row.noisy_score, row.metric}).percent;
    by_task.emplace_back(row.task, row.degradation_percent);
  }
  report.rows = std::move(rows);
  report.per_task = aggregate_by_task(by_task);
  return report;
}

ImpactReport impact_report_from_json(const Json& j) {
  if (!j.is_array()) throw SchemaError("impact scores: expected a JSON array");
  std::vector<ImpactRow> rows;
  for (const auto& r : j) {
    ImpactRow row;
    try {
      row.noise_source = r.at("noise_source").get<std::string>();
      row.dataset = r.at("dataset").get<std::string>();
      row.task = r.at("task").get<std::string>();
      row.metric = r.value("metric", std::string());
      row.clean_score = r.at("clean").get<double>();
      row.noisy_score = r.at("noisy").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("impact scores: ") + e.what());
    }
    rows.push_back(std::move(row));
  }
  return build_impact_report(std::move(rows));
}

Json to_json(const ImpactReport& report) {
  Json j = Json::object();
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row = Json::object();
    row["noise_source"] = r.noise_source;
    row["dataset"] = r.dataset;
    row["task"] = r.task;
    row["metric"] = r.metric;
    row["clean"] = r.clean_score;
    row["noisy"] = r.noisy_score;
    row["degradation_percent"] = r.degradation_percent;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  Json tasks = Json::object();
  for (const auto& [task, s] : report.per_task) {
    Json t = Json::object();
    t["median"] = s.median;
    t["average"] = s.average;
    t["count"] = s.count;
    tasks[task] = std::move(t);
  }
  j["per_task"] = std::move(tasks);
  return j;
}

std::string render_impact_report(const ImpactReport& report) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-26s %-10s %-5s %8s\n", "noise source", "dataset", "task", "score");
  out << buf;
  for (const auto& r : report.rows) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.3g%%", r.degradation_percent);
    std::snprintf(buf, sizeof buf, "%-26s %-10s %-5s %8.1f (%s)\n", r.noise_source.c_str(),
                  r.dataset.c_str(), r.task.c_str(), r.noisy_score, pct);
    out << buf;
  }
  out << "\n";
  std::string header = "        ";
  std::string median = "Median  ";
  std::string average = "Average ";
  for (const auto& [task, s] : report.per_task) {
    std::snprintf(buf, sizeof buf, "%8s", task.c_str());
    header += buf;
    std::snprintf(buf, sizeof buf, "%7.1f%%", s.median);
    median += buf;
    std::snprintf(buf, sizeof buf, "%7.1f%%", s.average);
    average += buf;
  }
  out << header << "\n" << median << "\n" << average << "\n";
  return out.str();
}

}  // namespace dialnoise
