#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dialnoise/error.hpp"
#include "dialnoise/taxonomy.hpp"

using namespace dialnoise;
using Id = NoiseCategory::Id;

namespace {

// Builds ten datasets of 1,000 reviewed dialogues whose per-dataset rates
// (percent) are the given values for one category.
std::vector<AuditTally> tallies_with(NoiseCategory cat, const std::vector<double>& rates,
                                     const std::vector<double>& overall) {
  std::vector<AuditTally> out;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    AuditTally t;
    t.dataset = "ds" + std::to_string(i);
    t.dialogues_reviewed = 1000;
    t.counts[cat] = static_cast<std::uint64_t>(std::llround(rates[i] * 10));
    t.dialogues_with_any_noise = static_cast<std::uint64_t>(std::llround(overall[i] * 10));
    out.push_back(t);
  }
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST(Taxonomy, TreeShape) {
  EXPECT_EQ(NoiseCategory::all().size(), 41u);
  EXPECT_EQ(NoiseCategory::leaves().size(), 29u);
  for (const auto& c : NoiseCategory::all()) {
    EXPECT_EQ(c.is_leaf(), c.children().empty()) << c.render();
    if (auto p = c.parent()) {
      EXPECT_TRUE(p->contains(c));
      EXPECT_EQ(c.depth(), p->depth() + 1);
      const auto kids = p->children();
      EXPECT_NE(std::find(kids.begin(), kids.end(), c), kids.end());
    } else {
      EXPECT_EQ(c.depth(), 0u);
    }
  }
}

TEST(Taxonomy, RenderParseRoundTrip) {
  for (const auto& c : NoiseCategory::all()) EXPECT_EQ(parse_category_node(c.render()), c);
  for (const auto& c : NoiseCategory::leaves()) EXPECT_EQ(parse_category(c.render()), c);
}

TEST(Taxonomy, KnownPaths) {
  EXPECT_EQ(NoiseCategory(Id::InstanceOver).render(), "training/labeling/instance/over");
  EXPECT_EQ(NoiseCategory(Id::ParaphraseVerbosity).render(), "inference/breakdown/paraphrase/verbosity");
  EXPECT_EQ(NoiseCategory(Id::OntologyTime).render(), "training/ontology/time");
  EXPECT_EQ(NoiseCategory(Id::DiscourseUnnatural).render(), "training/discourse/unnatural");
  EXPECT_EQ(NoiseCategory(Id::PerturbationTypo).render(), "inference/breakdown/perturbation/typo");
}

TEST(Taxonomy, ParsingIsLenient) {
  EXPECT_EQ(parse_category("Training/LabelingError/Class/Structured"), NoiseCategory(Id::ClassStructured));
  EXPECT_EQ(parse_category("TRAINING/labeling/instance_level/over"), NoiseCategory(Id::InstanceOver));
  EXPECT_EQ(parse_category_node("training/labeling/instance"), NoiseCategory(Id::Instance));
}

TEST(Taxonomy, UnknownPathSuggestsLeaves) {
  try {
    parse_category("training/labeling/clas/structurd");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("training/labeling/class/structured"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_category("training/labeling/class"), ParseError);  // group, not leaf
}

TEST(Taxonomy, ContainsIsTransitive) {
  const NoiseCategory training(Id::Training);
  EXPECT_TRUE(training.contains(Id::OntologyDate));
  EXPECT_FALSE(NoiseCategory(Id::Inference).contains(Id::OntologyDate));
}

TEST(Summarize, PopulationStatistics) {
  const auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.average, 5.0);
  EXPECT_DOUBLE_EQ(s.median, 4.5);
  EXPECT_DOUBLE_EQ(s.stddev, 2.0);
  EXPECT_EQ(summarize({}), PrevalenceStats{});
}

TEST(FormatPercent, SmallValues) {
  EXPECT_EQ(format_percent(4.94), "4.9%");
  EXPECT_EQ(format_percent(0.04), "<0.1%");
  EXPECT_EQ(format_percent(0.0), "0.0%");
  EXPECT_EQ(format_triplet({4.9, 3.8, 0.7}), "4.9/3.8/0.7");
}

TEST(Prevalence, InstanceAnnotatorOverallRows) {
  // Rates constructed so the rounded statistics land on the published rows.
  const std::vector<double> instance = {3.7, 4.6, 4.7, 6.8, 6.9, 6.9, 13.2, 14.4, 15.7, 20.1};
  const std::vector<double> annotator = {0.2, 0.3, 0.4, 0.7, 0.7, 0.7, 1.0, 2.8, 4.7, 6.5};
  const std::vector<double> overall = {5.7, 8.0, 8.3, 9.5, 10.6, 10.6, 11.0, 14.2, 15.1, 19.0};
  auto tallies = tallies_with(Id::InstancePartial, instance, overall);
  for (std::size_t i = 0; i < tallies.size(); ++i)
    tallies[i].counts[Id::AnnotatorFormatting] = static_cast<std::uint64_t>(std::llround(annotator[i] * 10));
  const auto report = aggregate_prevalence(tallies);
  EXPECT_EQ(format_triplet(report.at(Id::Instance)), "9.7/6.9/5.4");
  EXPECT_EQ(format_triplet(report.at(Id::Annotator)), "1.8/0.7/2.1");
  EXPECT_EQ(format_triplet(report.overall), "11.2/10.6/3.7");
  // The group row aggregates its leaves.
  EXPECT_EQ(report.at(Id::Instance), report.at(Id::InstancePartial));
  EXPECT_NEAR(report.at(Id::Labeling).average, mean(instance) + mean(annotator), 1e-9);
}

TEST(Prevalence, ClassRowCannotComeFromRates) {
  // For any data set |mean - median| <= population stddev, so a row with
  // average 4.9, median 3.8 and stddev 0.7 has no underlying rates; the
  // row can only be rendered from a constructed report.
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) v.push_back(std::fmod(trial * 7.3 + i * i * 1.9, 13.0));
    const auto s = summarize(v);
    EXPECT_LE(std::abs(s.average - s.median), s.stddev + 1e-12);
  }
  PrevalenceReport r = empty_prevalence_report();
  r.at(Id::Class) = {4.9, 3.8, 0.7};
  EXPECT_EQ(format_triplet(r.at(Id::Class)), "4.9/3.8/0.7");
}

TEST(Prevalence, PermutationInvariantAndFlags) {
  auto t = tallies_with(Id::ClassUniform, {1, 2, 3, 30}, {1, 2, 3, 30});
  auto a = aggregate_prevalence(t);
  std::reverse(t.begin(), t.end());
  EXPECT_EQ(aggregate_prevalence(t), a);
  std::set<std::string> flags;
  for (const auto& d : a.datasets) flags.insert(d.flag);
  EXPECT_TRUE(flags.count("below_5pct"));
  EXPECT_TRUE(flags.count("above_20pct"));
}

TEST(Prevalence, RejectsBadTallies) {
  EXPECT_THROW(aggregate_prevalence({}), Error);
  auto t = tallies_with(Id::ClassUniform, {1}, {1});
  t[0].dialogues_reviewed = 0;
  EXPECT_THROW(aggregate_prevalence(t), Error);
  t[0].dialogues_reviewed = 5;
  t[0].dialogues_with_any_noise = 6;
  EXPECT_THROW(aggregate_prevalence(t), Error);
}

TEST(Prevalence, JsonRoundTrip) {
  const auto report = aggregate_prevalence(tallies_with(Id::OntologyDate, {1.5, 2.5, 9.0}, {2, 3, 10}));
  const auto back = report_from_json(Json::parse(render_report(report, ReportFormat::json)));
  ASSERT_EQ(back.categories.size(), report.categories.size());
  EXPECT_NEAR(back.at(Id::OntologyDate).average, report.at(Id::OntologyDate).average, 1e-12);
  EXPECT_EQ(back.datasets.size(), 3u);
}

TEST(Prevalence, TextAndCompactRendering) {
  PrevalenceReport r = empty_prevalence_report();
  r.at(Id::Class) = {4.9, 3.8, 0.7};
  r.overall = {11.2, 10.6, 3.7};
  const std::string compact = render_report(r, ReportFormat::compact);
  EXPECT_NE(compact.find("training/labeling/class 4.9/3.8/0.7\n"), std::string::npos);
  EXPECT_NE(compact.find("overall 11.2/10.6/3.7\n"), std::string::npos);
  const std::string text = render_report(r, ReportFormat::text_table);
  EXPECT_NE(text.find("4.9%"), std::string::npos);
}

TEST(Tallies, JsonRoundTrip) {
  const Json j = Json::parse(R"([{"dataset": "MWOZ", "dialogues_reviewed": 200,
      "counts": {"training/ontology/time": 7, "Training/Labeling/Instance/Under": 3},
      "dialogues_with_any_noise": 9}])");
  const auto t = tallies_from_json(j);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].counts.at(Id::OntologyTime), 7u);
  EXPECT_EQ(t[0].counts.at(Id::InstanceUnder), 3u);
  EXPECT_EQ(tallies_from_json(Json::array({to_json(t[0])}))[0].counts, t[0].counts);
  EXPECT_THROW(tallies_from_json(Json::parse(R"([{"dataset": "x"}])")), SchemaError);
}
