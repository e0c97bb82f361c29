#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "dialnoise/error.hpp"
#include "dialnoise/metrics.hpp"
#include "dialnoise/random.hpp"

using namespace dialnoise;

namespace {

std::set<std::tuple<std::string, std::string, std::string>> as_set(const BeliefState& s) {
  std::set<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& sv : s) out.insert({casefold(sv.domain), casefold(sv.slot), casefold(sv.value)});
  return out;
}

}  // namespace

TEST(Jga, MatchesBruteForceSetEquality) {
  Rng rng(1);
  const std::vector<std::string> values = {"a", "B", "b", "c"};
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<BeliefState> pred(n), gold(n);
    std::size_t equal = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto* s : {&pred[i], &gold[i]}) {
        const std::size_t k = rng.below(3);
        for (std::size_t j = 0; j < k; ++j)
          s->push_back({"hotel", "s" + std::to_string(rng.below(3)), values[rng.below(values.size())]});
      }
      if (rng.below(3) == 0) {
        pred[i] = gold[i];
        std::reverse(pred[i].begin(), pred[i].end());
      }
      equal += as_set(pred[i]) == as_set(gold[i]);
    }
    EXPECT_DOUBLE_EQ(joint_goal_accuracy(pred, gold), static_cast<double>(equal) / static_cast<double>(n));
  }
}

TEST(Jga, ForcedCases) {
  const BeliefState s = {{"taxi", "leaveat", "16:45"}, {"taxi", "destination", "ely"}};
  const std::vector<BeliefState> gold = {s, s, s, s};
  std::vector<BeliefState> pred = gold;
  EXPECT_DOUBLE_EQ(joint_goal_accuracy(pred, gold), 1.0);
  pred[2].pop_back();
  EXPECT_DOUBLE_EQ(joint_goal_accuracy(pred, gold), 0.75);
  pred.pop_back();
  EXPECT_THROW(joint_goal_accuracy(pred, gold), Error);
  std::map<std::string, BeliefState> kp = {{"a:0", s}}, kg = {{"a:0", s}, {"a:1", s}};
  EXPECT_THROW(joint_goal_accuracy(kp, kg), Error);
  kp["a:1"] = {};
  EXPECT_DOUBLE_EQ(joint_goal_accuracy(kp, kg), 0.5);
}

TEST(Accuracy, ExactMatch) {
  const std::vector<std::string> gold = {"a", "b", "c", "a", "b", "c", "a", "b", "c", "a"};
  std::vector<std::string> pred(10, "x");
  pred[0] = "a";
  pred[1] = "b";
  pred[2] = "c";
  EXPECT_DOUBLE_EQ(classification_accuracy(pred, gold), 0.3);
  EXPECT_DOUBLE_EQ(classification_accuracy(gold, gold), 1.0);
  EXPECT_THROW(classification_accuracy(std::vector<std::string>{"a"}, gold), Error);
}

TEST(Bleu, HandComputedBigramCase) {
  // Unigrams: 5 of 6 match. Bigrams: 3 of 5 match, smoothed to 4/6.
  // Lengths equal, so no brevity penalty: sqrt(5/6 * 4/6).
  const double b = bleu("the cat sat on a mat", {"the cat sat on the mat"}, 2);
  EXPECT_NEAR(b, std::sqrt(5.0 / 6.0 * 4.0 / 6.0), 1e-6);
  EXPECT_NEAR(b, 0.745356, 1e-6);
}

TEST(Bleu, BrevityPenaltyAndLimits) {
  EXPECT_NEAR(bleu("the cat sat on the mat", {"the cat sat on the mat"}), 1.0, 1e-12);
  EXPECT_LT(bleu("alpha beta gamma delta", {"one two three four"}), 1e-3);
  // 3-token candidate against a 6-token reference, all unigrams matching.
  EXPECT_NEAR(bleu("the cat sat", {"the cat sat on the mat"}, 1), std::exp(1.0 - 6.0 / 3.0), 1e-12);
  // Closest reference length wins.
  EXPECT_NEAR(bleu("the cat sat", {"the cat sat on the mat", "the cat sat"}, 1), 1.0, 1e-12);
  EXPECT_THROW(bleu("", {"x"}), Error);
  EXPECT_THROW(bleu("x", {}), Error);
}

TEST(Bleu, CorpusPoolsCounts) {
  const double c = corpus_bleu({"the cat sat on a mat", "the cat sat on a mat"},
                               {{"the cat sat on the mat"}, {"the cat sat on the mat"}}, 2);
  // Pooled: unigrams 10/12, bigrams (6+1)/(10+1).
  EXPECT_NEAR(c, std::sqrt(10.0 / 12.0 * 7.0 / 11.0), 1e-9);
  EXPECT_THROW(corpus_bleu({"a"}, {}), Error);
}

TEST(Degradation, ArithmeticAndInversion) {
  const auto d = degradation({50.0, 45.0, "acc"});
  EXPECT_DOUBLE_EQ(d.absolute, 5.0);
  EXPECT_DOUBLE_EQ(d.percent, 10.0);
  EXPECT_DOUBLE_EQ(degradation({70.0, 70.0, "acc"}).percent, 0.0);
  EXPECT_THROW(degradation({0.0, 1.0, "acc"}), Error);
  const double noisy = noisy_from_degradation(84.21, 0.13);
  EXPECT_NEAR(noisy, 84.1, 0.05);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f (%.2f%%)", noisy, degradation({84.21, noisy, "jga"}).percent);
  EXPECT_STREQ(buf, "84.1 (0.13%)");
  EXPECT_NEAR(clean_from_degradation(noisy, 0.13), 84.21, 1e-9);
  EXPECT_THROW(clean_from_degradation(1.0, 100.0), Error);
}

TEST(Improvement, HeadlineArithmetic) {
  const auto i = relative_improvement(39.8, 56.7);
  EXPECT_NEAR(i.absolute, 16.9, 0.1);
  EXPECT_NEAR(i.relative, 42.5, 0.1);
  EXPECT_NEAR(relative_improvement(39.8, 58.6).relative, 47.2, 0.1);
  EXPECT_DOUBLE_EQ(relative_improvement(12.0, 12.0).absolute, 0.0);
  EXPECT_THROW(relative_improvement(0.0, 1.0), Error);
}

TEST(Aggregate, MedianAndAverage) {
  const std::vector<double> rg = {18.1, 15.9, 9.31, 11.3, 4.02, 4.44};
  std::vector<std::pair<std::string, double>> rows;
  for (double v : rg) rows.push_back({"RG", v});
  rows.push_back({"DST", 2.5});
  auto s = aggregate_by_task(rows);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f/%.1f", s["RG"].median, s["RG"].average);
  EXPECT_STREQ(buf, "10.3/10.5");
  EXPECT_EQ(s["RG"].count, 6u);
  EXPECT_DOUBLE_EQ(s["DST"].median, 2.5);
  EXPECT_DOUBLE_EQ(s["DST"].average, 2.5);
  std::reverse(rows.begin(), rows.end());
  const auto again = aggregate_by_task(rows);
  EXPECT_DOUBLE_EQ(again.at("RG").median, s["RG"].median);
  EXPECT_NEAR(again.at("RG").average, s["RG"].average, 1e-12);
}

TEST(LogCurve, RecoversGeneratedCoefficients) {
  std::vector<std::pair<double, double>> pts;
  for (double level : {0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8})
    pts.push_back({level, -5.0 * std::log(level + kLogCurveEpsilon) + 60.0});
  const auto fit = fit_log_curve(pts);
  EXPECT_NEAR(fit.a, -5.0, 1e-6);
  EXPECT_NEAR(fit.b, 60.0, 1e-6);
  EXPECT_NEAR(fit.residual, 0.0, 1e-9);
  std::vector<std::pair<double, double>> falling = {{0.0, 80}, {0.1, 70}, {0.2, 66}, {0.4, 61}};
  EXPECT_LT(fit_log_curve(falling).a, 0.0);
  EXPECT_THROW(fit_log_curve({{0.1, 1}, {0.2, 2}}), Error);
  EXPECT_THROW(fit_log_curve({{0.1, 1}, {0.1, 2}, {0.1, 3}}), Error);
  EXPECT_THROW(fit_log_curve({{-0.1, 1}, {0.1, 2}, {0.2, 3}}), Error);
}

TEST(Impact, ReportFromJson) {
  const auto j = Json::parse(R"([
    {"noise_source": "class", "dataset": "MWOZ", "task": "DST", "metric": "jga", "clean": 84.21, "noisy": 84.1},
    {"noise_source": "instance", "dataset": "MWOZ", "task": "DST", "clean": 50, "noisy": 45}
  ])");
  const auto r = impact_report_from_json(j);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(r.rows[1].degradation_percent, 10.0, 1e-12);
  EXPECT_EQ(r.per_task.at("DST").count, 2u);
  EXPECT_NE(render_impact_report(r).find("Median"), std::string::npos);
  EXPECT_EQ(to_json(r)["rows"].size(), 2u);
  EXPECT_THROW(impact_report_from_json(Json::parse(R"([{"task": "DST"}])")), SchemaError);
  EXPECT_THROW(impact_report_from_json(Json::object()), SchemaError);
}
