#include "dialnoise/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dialnoise/error.hpp"

namespace dialnoise {

namespace {

using Id = NoiseCategory::Id;

struct NodeInfo {
  Id id;
  std::string_view segment;
  int parent;  // index into kNodes, -1 for roots
  std::string_view display;
  std::array<std::string_view, 2> aliases;
};

// Pre-order. Index equals the Id's underlying value.
constexpr NodeInfo kNodes[] = {
    {Id::Training, "training", -1, "Training", {}},
    {Id::Labeling, "labeling", 0, "Labeling errors", {"labelingerror", "label"}},
    {Id::Class, "class", 1, "Class-level", {"classlevel"}},
    {Id::ClassUniform, "uniform", 2, "Uniform swap", {}},
    {Id::ClassStructured, "structured", 2, "Structured swap", {}},
    {Id::Instance, "instance", 1, "Instance-level", {"instancelevel"}},
    {Id::InstanceOver, "over", 5, "Over-labeling", {}},
    {Id::InstanceUnder, "under", 5, "Under-labeling", {}},
    {Id::InstancePartial, "partial", 5, "Partial labels", {}},
    {Id::Annotator, "annotator", 1, "Annotator-level", {"annotatorlevel", "annotation"}},
    {Id::AnnotatorDistantSupervision, "distant_supervision", 9, "Distant supervision", {}},
    {Id::AnnotatorAdversarial, "adversarial", 9, "Adversarial", {}},
    {Id::AnnotatorFormatting, "formatting", 9, "Formatting", {}},
    {Id::Ontology, "ontology", 0, "Ontology", {"ontologyinconsistency"}},
    {Id::OntologyDate, "date", 13, "Dates", {"dates"}},
    {Id::OntologyTime, "time", 13, "Times", {"times"}},
    {Id::OntologyLocation, "location", 13, "Locations", {"locations"}},
    {Id::OntologyNumber, "number", 13, "Numbers", {"numbers"}},
    {Id::OntologyGeneral, "general", 13, "General", {}},
    {Id::Discourse, "discourse", 0, "Discourse", {"discourseattribute", "discourseattributes"}},
    {Id::DiscourseIncoherent, "incoherent", 19, "Incoherent", {}},
    {Id::DiscourseDisfluent, "disfluent", 19, "Disfluent", {}},
    {Id::DiscourseInconsistent, "inconsistent", 19, "Inconsistent", {}},
    {Id::DiscourseNonsensical, "nonsensical", 19, "Nonsensical", {}},
    {Id::DiscourseOffensive, "offensive", 19, "Offensive", {}},
    {Id::DiscourseUnnatural, "unnatural", 19, "Unnatural", {}},
    {Id::Inference, "inference", -1, "Inference", {}},
    {Id::Ood, "ood", 26, "Out-of-distribution", {"outofdistribution"}},
    {Id::OodNovelQuery, "novel_query", 27, "Novel query", {}},
    {Id::OodUnseenEntity, "unseen_entity", 27, "Unseen entity", {}},
    {Id::OodDomainShift, "domain_shift", 27, "Domain shift", {}},
    {Id::Breakdown, "breakdown", 26, "Dialogue breakdown", {"dialoguebreakdown"}},
    {Id::BreakdownAmbiguous, "ambiguous", 31, "Ambiguous", {}},
    {Id::Paraphrase, "paraphrase", 31, "Paraphrase", {"paraphrasing"}},
    {Id::ParaphraseSimplification, "simplification", 33, "Simplification", {}},
    {Id::ParaphraseNonSequitur, "non_sequitur", 33, "Non sequitur", {}},
    {Id::ParaphraseVerbosity, "verbosity", 33, "Verbosity", {}},
    {Id::Perturbation, "perturbation", 31, "Text perturbation", {"textperturbation"}},
    {Id::PerturbationAsr, "asr", 37, "ASR error", {}},
    {Id::PerturbationTypo, "typo", 37, "Typo", {"typos"}},
    {Id::PerturbationDisfluency, "disfluency", 37, "Speech disfluency", {}},
};

constexpr std::size_t kNodeCount = std::size(kNodes);

const NodeInfo& info(Id id) { return kNodes[static_cast<std::size_t>(id)]; }

std::string normalize_segment(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '-' || c == ' ') continue;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

bool segment_matches(const NodeInfo& node, const std::string& normalized) {
  if (normalize_segment(node.segment) == normalized) return true;
  for (auto alias : node.aliases)
    if (!alias.empty() && alias == normalized) return true;
  return false;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggestions_for(std::string_view input) {
  std::vector<std::pair<std::size_t, std::string>> ranked;
  const std::string lowered = casefold(input);
  for (auto leaf : NoiseCategory::leaves()) {
    std::string path = leaf.render();
    ranked.emplace_back(levenshtein(lowered, path), path);
  }
  std::sort(ranked.begin(), ranked.end());
  std::string out;
  for (std::size_t i = 0; i < 3 && i < ranked.size(); ++i) {
    if (i) out += ", ";
    out += ranked[i].second;
  }
  return out;
}

}  // namespace

bool NoiseCategory::is_leaf() const {
  const auto self = static_cast<int>(id_);
  for (const auto& n : kNodes)
    if (n.parent == self) return false;
  return true;
}

std::vector<std::string_view> NoiseCategory::segments() const {
  std::vector<std::string_view> out;
  for (int i = static_cast<int>(id_); i >= 0; i = kNodes[i].parent) out.push_back(kNodes[i].segment);
  std::reverse(out.begin(), out.end());
  return out;
}

std::string NoiseCategory::render() const {
  std::string out;
  for (auto seg : segments()) {
    if (!out.empty()) out += '/';
    out += seg;
  }
  return out;
}

std::string_view NoiseCategory::display_name() const { return info(id_).display; }

std::optional<NoiseCategory> NoiseCategory::parent() const {
  int p = info(id_).parent;
  if (p < 0) return std::nullopt;
  return NoiseCategory(kNodes[p].id);
}

std::vector<NoiseCategory> NoiseCategory::children() const {
  std::vector<NoiseCategory> out;
  for (const auto& n : kNodes)
    if (n.parent == static_cast<int>(id_)) out.emplace_back(n.id);
  return out;
}

std::size_t NoiseCategory::depth() const { return segments().size() - 1; }

bool NoiseCategory::contains(NoiseCategory other) const {
  for (std::optional<NoiseCategory> c = other; c; c = c->parent())
    if (*c == *this) return true;
  return false;
}

const std::vector<NoiseCategory>& NoiseCategory::all() {
  static const std::vector<NoiseCategory> nodes = [] {
    std::vector<NoiseCategory> v;
    for (const auto& n : kNodes) v.emplace_back(n.id);
    return v;
  }();
  return nodes;
}

const std::vector<NoiseCategory>& NoiseCategory::leaves() {
  static const std::vector<NoiseCategory> nodes = [] {
    std::vector<NoiseCategory> v;
    for (auto c : all())
      if (c.is_leaf()) v.push_back(c);
    return v;
  }();
  return nodes;
}

NoiseCategory parse_category_node(std::string_view s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : trim(s)) {
    if (c == '/') {
      parts.push_back(normalize_segment(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(normalize_segment(cur));
  int parent = -1;
  std::optional<Id> found;
  for (const auto& part : parts) {
    found.reset();
    for (std::size_t i = 0; i < kNodeCount; ++i) {
      if (kNodes[i].parent == parent && segment_matches(kNodes[i], part)) {
        found = kNodes[i].id;
        parent = static_cast<int>(i);
        break;
      }
    }
    if (!found)
      throw ParseError("unknown noise category '" + std::string(s) +
                       "'; nearest valid leaves: " + suggestions_for(s));
  }
  return NoiseCategory(*found);
}

NoiseCategory parse_category(std::string_view s) {
  NoiseCategory c = parse_category_node(s);
  if (!c.is_leaf())
    throw ParseError("'" + std::string(s) + "' is a category group, not a leaf; nearest valid leaves: " +
                     suggestions_for(s));
  return c;
}

// ---------------------------------------------------------------------------
// Aggregation

PrevalenceStats summarize(std::vector<double> values) {
  PrevalenceStats s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.average = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
  double ss = 0.0;
  for (double v : values) ss += (v - s.average) * (v - s.average);
  s.stddev = std::sqrt(ss / n);
  return s;
}

const PrevalenceStats& PrevalenceReport::at(NoiseCategory c) const {
  for (const auto& [cat, stats] : categories)
    if (cat == c) return stats;
  throw Error("category " + c.render() + " missing from report");
}

PrevalenceStats& PrevalenceReport::at(NoiseCategory c) {
  return const_cast<PrevalenceStats&>(std::as_const(*this).at(c));
}

PrevalenceReport empty_prevalence_report() {
  PrevalenceReport r;
  for (auto c : NoiseCategory::all()) r.categories.emplace_back(c, PrevalenceStats{});
  return r;
}

PrevalenceReport aggregate_prevalence(const std::vector<AuditTally>& input) {
  if (input.empty()) throw Error("aggregate_prevalence: no tallies");
  // Order-independent: sort by dataset name first.
  std::vector<AuditTally> tallies = input;
  std::sort(tallies.begin(), tallies.end(),
            [](const AuditTally& a, const AuditTally& b) { return a.dataset < b.dataset; });
  for (const auto& t : tallies) {
    if (t.dialogues_reviewed == 0)
      throw Error("tally for '" + t.dataset + "' has dialogues_reviewed == 0");
    if (t.dialogues_with_any_noise > t.dialogues_reviewed)
      throw Error("tally for '" + t.dataset + "' has more noisy dialogues than reviewed");
  }

  PrevalenceReport report;
  for (auto cat : NoiseCategory::all()) {
    std::vector<double> rates;
    for (const auto& t : tallies) {
      std::uint64_t count = 0;
      for (const auto& [c, n] : t.counts)
        if (cat.contains(c)) count += n;
      rates.push_back(100.0 * static_cast<double>(count) / static_cast<double>(t.dialogues_reviewed));
    }
    report.categories.emplace_back(cat, summarize(std::move(rates)));
  }
  std::vector<double> overall;
  for (const auto& t : tallies) {
    const double rate = 100.0 * static_cast<double>(t.dialogues_with_any_noise) /
                        static_cast<double>(t.dialogues_reviewed);
    overall.push_back(rate);
    std::string flag;
    if (rate < 5.0) flag = "below_5pct";
    if (rate > 20.0) flag = "above_20pct";
    report.datasets.push_back({t.dataset, rate, flag});
  }
  report.overall = summarize(std::move(overall));
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_percent(double percent) {
  if (percent > 0.0 && percent < 0.05) return "<0.1%";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", percent);
  return buf;
}

std::string format_triplet(const PrevalenceStats& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.1f/%.1f/%.1f", s.average, s.median, s.stddev);
  return buf;
}

namespace {

Json stats_json(const PrevalenceStats& s) {
  Json j = Json::object();
  j["average"] = s.average;
  j["median"] = s.median;
  j["stddev"] = s.stddev;
  return j;
}

PrevalenceStats stats_from_json(const Json& j) {
  return {j.at("average").get<double>(), j.at("median").get<double>(), j.at("stddev").get<double>()};
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() < width ? std::string(width - s.size(), ' ') + s : s;
}

}  // namespace

std::string render_report(const PrevalenceReport& report, ReportFormat format) {
  if (format == ReportFormat::json) {
    Json j = Json::object();
    Json cats = Json::array();
    for (const auto& [cat, stats] : report.categories) {
      Json row = stats_json(stats);
      row["category"] = cat.render();
      cats.push_back(std::move(row));
    }
    j["categories"] = std::move(cats);
    j["overall"] = stats_json(report.overall);
    Json ds = Json::array();
    for (const auto& d : report.datasets) {
      Json row = Json::object();
      row["dataset"] = d.dataset;
      row["rate"] = d.rate;
      row["flag"] = d.flag;
      ds.push_back(std::move(row));
    }
    j["datasets"] = std::move(ds);
    return j.dump(2) + "\n";
  }

  std::ostringstream out;
  if (format == ReportFormat::compact) {
    for (const auto& [cat, stats] : report.categories) out << cat.render() << " " << format_triplet(stats) << "\n";
    out << "overall " << format_triplet(report.overall) << "\n";
    return out.str();
  }
  out << pad("category", 46) << lpad("average", 9) << lpad("median", 9) << lpad("stddev", 9) << "\n";
  auto row = [&](const std::string& label, const PrevalenceStats& s) {
    out << pad(label, 46) << lpad(format_percent(s.average), 9) << lpad(format_percent(s.median), 9)
        << lpad(format_percent(s.stddev), 9) << "\n";
  };
  for (const auto& [cat, stats] : report.categories)
    row(std::string(2 * cat.depth(), ' ') + cat.render(), stats);
  row("overall", report.overall);
  if (!report.datasets.empty()) {
    out << "\n" << pad("dataset", 46) << lpad("noisy", 9) << "  flag\n";
    for (const auto& d : report.datasets)
      out << pad(d.dataset, 46) << lpad(format_percent(d.rate), 9) << "  " << d.flag << "\n";
  }
  return out.str();
}

PrevalenceReport report_from_json(const Json& j) {
  PrevalenceReport r = empty_prevalence_report();
  for (const auto& row : j.at("categories"))
    r.at(parse_category_node(row.at("category").get<std::string>())) = stats_from_json(row);
  r.overall = stats_from_json(j.at("overall"));
  for (const auto& d : j.at("datasets"))
    r.datasets.push_back({d.at("dataset").get<std::string>(), d.at("rate").get<double>(),
                          d.at("flag").get<std::string>()});
  return r;
}

// ---------------------------------------------------------------------------
// Tally I/O

Json to_json(const AuditTally& t) {
  Json j = Json::object();
  j["dataset"] = t.dataset;
  j["dialogues_reviewed"] = t.dialogues_reviewed;
  Json counts = Json::object();
  for (const auto& [c, n] : t.counts) counts[c.render()] = n;
  j["counts"] = std::move(counts);
  j["dialogues_with_any_noise"] = t.dialogues_with_any_noise;
  return j;
}

std::vector<AuditTally> tallies_from_json(const Json& j) {
  if (!j.is_array()) throw SchemaError("tally file must be a JSON array");
  std::vector<AuditTally> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const Json& t = j[i];
    auto count = [&](const Json& v, const std::string& where) -> std::uint64_t {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw SchemaError(where + ": expected non-negative integer");
      return v.get<std::uint64_t>();
    };
    AuditTally tally;
    if (!t.is_object() || !t.contains("dataset") || !t["dataset"].is_string())
      throw SchemaError(path + ".dataset: missing or not a string");
    tally.dataset = t["dataset"].get<std::string>();
    if (!t.contains("dialogues_reviewed")) throw SchemaError(path + ".dialogues_reviewed: missing");
    tally.dialogues_reviewed = count(t["dialogues_reviewed"], path + ".dialogues_reviewed");
    if (!t.contains("dialogues_with_any_noise"))
      throw SchemaError(path + ".dialogues_with_any_noise: missing");
    tally.dialogues_with_any_noise =
        count(t["dialogues_with_any_noise"], path + ".dialogues_with_any_noise");
    if (t.contains("counts")) {
      if (!t["counts"].is_object()) throw SchemaError(path + ".counts: expected object");
      for (const auto& [k, v] : t["counts"].items())
        tally.counts[parse_category_node(k)] += count(v, path + ".counts." + k);
    }
    out.push_back(std::move(tally));
  }
  return out;
}

std::vector<AuditTally> load_tallies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tally file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return tallies_from_json(j);
}

}  // namespace dialnoise
