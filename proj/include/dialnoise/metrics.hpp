#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialnoise/corpus.hpp"

namespace dialnoise {

using BeliefState = std::vector<SlotValue>;

/// Fraction of examples whose predicted state set equals the gold set after
/// casefolding every field. Inputs are aligned by position.
double joint_goal_accuracy(std::span<const BeliefState> predicted, std::span<const BeliefState> gold);

/// Keyed variant; the two maps must hold exactly the same example ids.
double joint_goal_accuracy(const std::map<std::string, BeliefState>& predicted,
                           const std::map<std::string, BeliefState>& gold);

double classification_accuracy(std::span<const std::string> predicted, std::span<const std::string> gold);

std::vector<std::string> tokenize(std::string_view text);

/// Sentence BLEU with brevity penalty (closest reference length) and add-one
/// smoothing on the n > 1 precisions. Whitespace tokenization.
double bleu(std::string_view candidate, const std::vector<std::string>& references, int max_n = 4);

/// Corpus BLEU: clipped counts and lengths are pooled before the precisions
/// are formed. Same smoothing as `bleu`.
double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::vector<std::string>>& references, int max_n = 4);

struct ScorePair {
  double clean_score = 0.0;
  double noisy_score = 0.0;
  std::string metric_name;
};

struct Degradation {
  double absolute = 0.0;
  double percent = 0.0;
};

/// absolute = clean - noisy, percent = absolute / clean * 100.
Degradation degradation(const ScorePair& pair);
/// Noisy score implied by a clean score and a percent degradation.
double noisy_from_degradation(double clean, double percent);
/// Clean score implied by a noisy score and a percent degradation.
double clean_from_degradation(double noisy, double percent);

struct Improvement {
  double absolute = 0.0;
  double relative = 0.0;  // percent of baseline
};

Improvement relative_improvement(double baseline, double improved);

struct TaskSummary {
  double median = 0.0;
  double average = 0.0;
  std::size_t count = 0;
};

std::map<std::string, TaskSummary> aggregate_by_task(
    const std::vector<std::pair<std::string, double>>& rows);

struct LogCurveFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // sum of squared residuals
};

inline constexpr double kLogCurveEpsilon = 1e-3;

/// Least squares for score = a * ln(level + 1e-3) + b.
LogCurveFit fit_log_curve(const std::vector<std::pair<double, double>>& points);

struct ImpactRow {
  std::string noise_source;
  std::string dataset;
  std::string task;
  std::string metric;
  double clean_score = 0.0;
  double noisy_score = 0.0;
  double degradation_percent = 0.0;
};

struct ImpactReport {
  std::vector<ImpactRow> rows;
  std::map<std::string, TaskSummary> per_task;
};

/// Builds rows (degradation computed from the scores) and per-task summaries.
ImpactReport build_impact_report(std::vector<ImpactRow> rows);
ImpactReport impact_report_from_json(const Json& j);
Json to_json(const ImpactReport& report);
std::string render_impact_report(const ImpactReport& report);

}  // namespace dialnoise
