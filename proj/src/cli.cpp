#include "dialnoise/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dialnoise/calibration.hpp"
#include "dialnoise/corpus.hpp"
#include "dialnoise/data_tables.hpp"
#include "dialnoise/denoiser.hpp"
#include "dialnoise/error.hpp"
#include "dialnoise/injector.hpp"
#include "dialnoise/metrics.hpp"
#include "dialnoise/ontology.hpp"
#include "dialnoise/predictions.hpp"
#include "dialnoise/taxonomy.hpp"

namespace dialnoise::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string format = "text";
  unsigned jobs = 1;
};

struct TableOverrides {
  std::string variant_tables, asr_table, keyboard, unnatural_phrases, generic_phrases;
};

struct ServiceFlags {
  double timeout_s = 5.0;
  unsigned retries = 2;

  ServiceOptions options(const std::string& url) const {
    return {url, std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)), retries};
  }
};

struct InjectFlags {
  std::string in, out, log, skipped, category, params, schema, embeddings;
  std::string target, kind, speaker, paraphrase_file, paraphrase_url, out_dir, levels;
  std::size_t window_size = 0;
  double rate = 0.10;
  std::uint64_t seed = 0;
};

struct AuditFlags {
  std::string in;
};

struct CleanFlags {
  std::string in, out, schema, policy = "drop_example", report;
};

struct CalibrateFlags {
  std::string dev, grid;
  std::size_t bins = 10;
};

struct DenoiseFlags {
  std::string in, out, steps = "ontology,filter,coteach", pred_a, pred_b, pred_a_url, pred_b_url;
  std::string schema, policy = "drop_example", match = "exact_state", target, dev, report;
  double threshold = 0.5;
  double temperature = 0.0;
};

struct SplitFlags {
  std::string in, test, holdout, out_dir;
  bool leave_one_out = false;
};

struct EvalFlags {
  std::string metric, pred, gold, impact;
  int max_n = 4;
};

struct StatsFlags {
  std::string in;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw Error(std::string("bad number '") + item + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw Error(std::string(what) + " is empty");
  return out;
}

std::string format_level(double level) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, level);
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

bool want_json(const Common& c) {
  if (c.format == "json") return true;
  if (c.format == "text") return false;
  throw Error("unknown --format '" + c.format + "' (text|json)");
}

DataTables load_tables(const TableOverrides& o) {
  const fs::path dir = data_dir();
  auto pick = [&](const std::string& override_path, const char* name) {
    return override_path.empty() ? dir / name : fs::path(override_path);
  };
  DataTables t;
  t.variants = load_variant_tables(pick(o.variant_tables, "variant_tables.json"));
  t.asr_confusions = load_asr_confusions(pick(o.asr_table, "asr_confusions.json"));
  t.keyboard_neighbors = load_keyboard(pick(o.keyboard, "keyboard_qwerty.json"));
  t.unnatural_phrases = load_phrases(pick(o.unnatural_phrases, "unnatural_phrases.json"));
  t.generic_phrases = load_phrases(pick(o.generic_phrases, "generic_phrases.json"));
  return t;
}

std::shared_ptr<const OntologySchema> maybe_schema(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const OntologySchema>(load_schema(path));
}

// Inject / sweep ------------------------------------------------------------

struct InjectSetup {
  Corpus corpus;
  NoiseSpec spec;
  InjectionResources resources;
  std::unique_ptr<Perturber> perturber;
};

InjectSetup prepare_inject(const InjectFlags& f, const TableOverrides& o, const ServiceFlags& svc) {
  InjectSetup s;
  s.spec.category = parse_category_node(f.category);
  if (!is_injectable(s.spec.category))
    throw Error("category " + s.spec.category.render() + " cannot be injected");
  s.spec.rate = f.rate;
  s.spec.seed = f.seed;
  if (!f.params.empty()) {
    try {
      s.spec.params = f.params.front() == '@' ? read_json(f.params.substr(1)) : Json::parse(f.params);
    } catch (const Json::exception& e) {
      throw ParseError(std::string("--params: ") + e.what());
    }
  }
  if (!f.target.empty()) s.spec.params["target"] = f.target;
  if (!f.kind.empty()) s.spec.params["kind"] = f.kind;
  if (!f.speaker.empty()) s.spec.params["speaker"] = f.speaker;
  if (f.window_size) s.spec.params["window_size"] = f.window_size;

  s.corpus = load_corpus(f.in);
  s.resources.tables = load_tables(o);
  s.resources.schema = maybe_schema(f.schema);
  if (!s.resources.schema) s.resources.schema = s.corpus.ontology;
  if (!f.embeddings.empty())
    s.resources.embeddings = std::make_shared<const EmbeddingTable>(EmbeddingTable::load_glove(f.embeddings));
  if (!f.paraphrase_file.empty()) {
    s.perturber = std::make_unique<FilePerturber>(f.paraphrase_file);
  } else if (!f.paraphrase_url.empty()) {
    s.perturber = std::make_unique<HttpPerturber>(svc.options(f.paraphrase_url));
  }
  s.resources.perturber = s.perturber.get();
  return s;
}

Json injection_summary(const NoiseSpec& spec, double level, const InjectionResult& r) {
  Json j = Json::object();
  j["category"] = spec.category.render();
  j["rate"] = level;
  j["seed"] = spec.seed;
  j["corrupted"] = r.log.size();
  j["skipped"] = r.skipped.size();
  return j;
}

int cmd_inject(const InjectFlags& f, const TableOverrides& o, const ServiceFlags& svc, const Common& c,
               std::ostream& out) {
  const bool json = want_json(c);
  InjectSetup s = prepare_inject(f, o, svc);
  InjectionResult r = inject(s.corpus, s.spec, s.resources, c.jobs);
  save_corpus(r.corpus, f.out);
  if (!f.log.empty()) save_log(r.log, f.log);
  if (!f.skipped.empty()) {
    std::string text;
    for (const auto& sk : r.skipped) {
      Json j = Json::object();
      j["example_id"] = sk.example_id.str();
      j["reason"] = sk.reason;
      text += j.dump() + "\n";
    }
    write_text(f.skipped, text);
  }
  if (json) {
    out << pretty(injection_summary(s.spec, s.spec.rate, r));
  } else {
    out << "corrupted " << r.log.size() << " example(s) with " << s.spec.category.render();
    if (!r.skipped.empty()) out << " (" << r.skipped.size() << " skipped)";
    out << "\n";
  }
  return 0;
}

int cmd_sweep(const InjectFlags& f, const TableOverrides& o, const ServiceFlags& svc, const Common& c,
              std::ostream& out) {
  const bool json = want_json(c);
  InjectSetup s = prepare_inject(f, o, svc);
  const auto levels = parse_numbers(f.levels, "--levels");
  const auto points = sweep(s.corpus, s.spec, levels, s.resources, c.jobs);
  fs::create_directories(f.out_dir);
  Json summary = Json::array();
  for (const auto& p : points) {
    const std::string stem = "level_" + format_level(p.level);
    save_corpus(p.result.corpus, fs::path(f.out_dir) / (stem + ".json"));
    save_log(p.result.log, fs::path(f.out_dir) / (stem + ".log.jsonl"));
    NoiseSpec spec = s.spec;
    spec.seed = p.level == 0.0 ? s.spec.seed : sweep_seed(s.spec.seed, p.level);
    summary.push_back(injection_summary(spec, p.level, p.result));
  }
  if (json) {
    out << pretty(summary);
  } else {
    for (const auto& row : summary)
      out << "level " << format_level(row["rate"].get<double>()) << ": corrupted "
          << row["corrupted"].get<std::size_t>() << "\n";
  }
  return 0;
}

// Other subcommands ---------------------------------------------------------

int cmd_audit(const AuditFlags& f, const Common& c, std::ostream& out) {
  ReportFormat format = ReportFormat::compact;
  if (c.format != "compact") format = want_json(c) ? ReportFormat::json : ReportFormat::text_table;
  const auto report = aggregate_prevalence(load_tallies(f.in));
  out << render_report(report, format);
  return 0;
}

int cmd_clean(const CleanFlags& f, const Common& c, std::ostream& out) {
  const bool json = want_json(c);
  const Corpus corpus = load_corpus(f.in);
  const OntologySchema schema = load_schema(f.schema);
  const CleaningOutcome outcome = clean_ontology(corpus, schema, parse_cleaning_policy(f.policy));
  save_corpus(outcome.clean_corpus, f.out);
  const Json ledger = to_json(outcome);
  if (!f.report.empty()) write_text(f.report, pretty(ledger));
  if (json) {
    out << pretty(ledger);
  } else {
    out << "dropped values     " << outcome.dropped_values.size() << "\n"
        << "removed examples   " << outcome.removed_examples.size() << "\n"
        << "normalized values  " << outcome.normalized.size() << "\n";
  }
  return 0;
}

int cmd_calibrate(const CalibrateFlags& f, const Common& c, std::ostream& out) {
  const bool json = want_json(c);
  const auto records = load_logit_records(f.dev);
  const std::vector<double> grid =
      f.grid.empty() ? default_temperature_grid() : parse_numbers(f.grid, "--grid");
  const TemperatureFit fit = fit_temperature(records, grid);
  const double ece_before = expected_calibration_error(records, 1.0, f.bins);
  const double ece_after = expected_calibration_error(records, fit.temperature, f.bins);
  if (json) {
    Json j = to_json(fit);
    j["ece_baseline"] = ece_before;
    j["ece"] = ece_after;
    j["bins"] = f.bins;
    out << pretty(j);
  } else {
    out << render_fit(fit);
    char buf[96];
    std::snprintf(buf, sizeof buf, "ECE (%zu bins): %.4f at 1, %.4f at %g\n", f.bins, ece_before, ece_after,
                  fit.temperature);
    out << buf;
  }
  return 0;
}

std::vector<PredictionRecord> gather_predictions(const std::string& file, const std::string& url,
                                                 const Corpus& corpus, const ServiceFlags& svc,
                                                 unsigned jobs) {
  if (!file.empty()) return load_predictions(file);
  if (url.empty()) return {};
  // A service is asked about every turn a denoiser could judge.
  std::vector<ExampleId> ids = all_turn_ids(corpus);
  std::sort(ids.begin(), ids.end());
  return PredictionClient(svc.options(url)).predict_all(corpus, ids, jobs);
}

int cmd_denoise(const DenoiseFlags& f, const ServiceFlags& svc, const Common& c, std::ostream& out,
                std::ostream& err) {
  const bool json = want_json(c);
  const Corpus corpus = load_corpus(f.in);
  DenoiseConfig config;
  for (const auto& s : split_list(f.steps)) config.steps.insert(parse_denoise_step(s));
  config.threshold = f.threshold;
  config.schema = maybe_schema(f.schema);
  config.cleaning = parse_cleaning_policy(f.policy);
  config.match_mode = parse_match_mode(f.match);
  if (!f.target.empty()) config.target = parse_label_target(f.target);
  if (f.temperature > 0.0) {
    config.temperature = f.temperature;
  } else if (!f.dev.empty()) {
    const auto dev = load_logit_records(f.dev);
    config.temperature = fit_temperature(dev, default_temperature_grid()).temperature;
  } else if (config.steps.count(DenoiseStep::coteach_pseudo)) {
    err << "warning: no --dev set or --temperature; pseudo-labeling uses temperature 1\n";
  }
  // Service predictions are only fetched for the roles a step needs.
  const bool need_a = config.steps.count(DenoiseStep::filter_disagree) > 0;
  const bool need_b = config.steps.count(DenoiseStep::coteach_pseudo) > 0;
  const auto preds_a = need_a || !f.pred_a.empty()
                           ? gather_predictions(f.pred_a, f.pred_a_url, corpus, svc, c.jobs)
                           : std::vector<PredictionRecord>{};
  const auto preds_b = need_b || !f.pred_b.empty()
                           ? gather_predictions(f.pred_b, f.pred_b_url, corpus, svc, c.jobs)
                           : std::vector<PredictionRecord>{};
  const DenoiseResult result = run_pipeline(corpus, config, preds_a, preds_b);
  save_corpus(result.clean_corpus, f.out);
  if (!f.report.empty()) write_text(f.report, pretty(to_json(result)));
  if (json) {
    Json j = to_json(result);
    j.erase("provenance");
    j["temperature"] = config.temperature;
    out << pretty(j);
  } else {
    out << render_denoise(result);
  }
  return 0;
}

int cmd_split(const SplitFlags& f, const Common& c, std::ostream& out) {
  const bool json = want_json(c);
  const Corpus train_pool = load_corpus(f.in);
  const Corpus test_pool = f.test.empty() ? train_pool : load_corpus(f.test);
  std::vector<OodSplit> splits;
  if (f.leave_one_out) {
    if (!f.holdout.empty()) throw Error("use either --holdout or --leave-one-out");
    splits = leave_one_out_splits(train_pool, test_pool);
  } else {
    if (f.holdout.empty()) throw Error("split-ood needs --holdout or --leave-one-out");
    const auto h = split_list(f.holdout);
    splits.push_back(make_ood_split(train_pool, test_pool, {h.begin(), h.end()}));
  }
  fs::create_directories(f.out_dir);
  Json summary = Json::array();
  for (const auto& s : splits) {
    std::string name;
    for (const auto& d : s.heldout) name += (name.empty() ? "" : "+") + d;
    save_corpus(s.train, fs::path(f.out_dir) / ("holdout_" + name + ".train.json"));
    save_corpus(s.test, fs::path(f.out_dir) / ("holdout_" + name + ".test.json"));
    Json j = Json::object();
    j["heldout"] = std::vector<std::string>(s.heldout.begin(), s.heldout.end());
    j["train_dialogues"] = s.train.dialogues.size();
    j["test_dialogues"] = s.test.dialogues.size();
    summary.push_back(std::move(j));
  }
  if (json) {
    out << pretty(summary);
  } else {
    for (const auto& j : summary)
      out << "holdout " << j["heldout"].dump() << ": train " << j["train_dialogues"].get<std::size_t>()
          << " dialogues, test " << j["test_dialogues"].get<std::size_t>() << "\n";
  }
  return 0;
}

int cmd_eval(const EvalFlags& f, const Common& c, std::ostream& out) {
  const bool json = want_json(c);
  if (!f.impact.empty()) {
    const ImpactReport report = impact_report_from_json(read_json(f.impact));
    out << (json ? pretty(to_json(report)) : render_impact_report(report));
    return 0;
  }
  if (f.metric.empty() || f.pred.empty() || f.gold.empty())
    throw Error("eval needs --metric, --pred and --gold (or --impact)");
  const Corpus gold = load_corpus(f.gold);
  double score = 0.0;
  std::size_t n = 0;
  if (f.metric == "jga" || f.metric == "acc") {
    const auto preds = load_predictions(f.pred);
    std::map<ExampleId, const PredictionRecord*> by_id;
    for (const auto& p : preds) by_id[p.example_id] = &p;
    if (f.metric == "jga") {
      std::map<std::string, BeliefState> predicted, truth;
      for (const auto& d : gold.dialogues)
        for (const auto& t : d.turns) {
          if (t.speaker != Speaker::user) continue;
          const ExampleId id{d.dialogue_id, t.turn_id};
          auto it = by_id.find(id);
          if (it == by_id.end()) throw Error("no prediction for " + id.str());
          predicted[id.str()] = predicted_state(*it->second);
          truth[id.str()] = t.labels.belief_state;
        }
      score = joint_goal_accuracy(predicted, truth);
      n = truth.size();
    } else {
      std::vector<std::string> predicted, truth;
      for (const auto& d : gold.dialogues)
        for (const auto& t : d.turns) {
          const auto& labels = !t.labels.class_labels.empty() ? t.labels.class_labels : t.labels.dialog_acts;
          if (labels.empty()) continue;
          const ExampleId id{d.dialogue_id, t.turn_id};
          auto it = by_id.find(id);
          if (it == by_id.end()) throw Error("no prediction for " + id.str());
          predicted.push_back(predicted_label(*it->second));
          truth.push_back(labels.front());
        }
      score = classification_accuracy(predicted, truth);
      n = truth.size();
    }
  } else if (f.metric == "bleu") {
    // Generated responses: JSONL lines of {"example_id", "text"}.
    std::map<ExampleId, std::string> generated;
    std::istringstream in(read_text(f.pred));
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        const Json j = Json::parse(line);
        generated[ExampleId::parse(j.at("example_id").get<std::string>())] = j.at("text").get<std::string>();
      } catch (const Json::exception& e) {
        throw ParseError(f.pred + ": " + e.what());
      }
    }
    std::vector<std::string> candidates;
    std::vector<std::vector<std::string>> references;
    for (const auto& d : gold.dialogues)
      for (const auto& t : d.turns) {
        if (!t.labels.reference_response) continue;
        const ExampleId id{d.dialogue_id, t.turn_id};
        auto it = generated.find(id);
        if (it == generated.end()) throw Error("no generated response for " + id.str());
        candidates.push_back(it->second);
        references.push_back({*t.labels.reference_response});
      }
    score = corpus_bleu(candidates, references, f.max_n);
    n = candidates.size();
  } else {
    throw Error("unknown --metric '" + f.metric + "' (jga|acc|bleu)");
  }
  if (json) {
    Json j = Json::object();
    j["metric"] = f.metric;
    j["score"] = score;
    j["examples"] = n;
    out << pretty(j);
  } else {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.4f over %zu example(s)\n", f.metric.c_str(), score, n);
    out << buf;
  }
  return 0;
}

int cmd_stats(const StatsFlags& f, const Common& c, std::ostream& out) {
  const bool json = want_json(c);
  const StatsReport report = corpus_stats(load_corpus(f.in));
  out << (json ? pretty(to_json(report)) : render_stats(report));
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool jobs) {
  sub->add_option("--format", c.format, "Report format: text or json")->capture_default_str();
  if (jobs) sub->add_option("--jobs", c.jobs, "Worker threads; results do not depend on it")
                ->check(CLI::Range(1u, 1024u))
                ->capture_default_str();
}

void add_injection_flags(CLI::App* sub, InjectFlags& f, TableOverrides& o, ServiceFlags& svc) {
  sub->add_option("--in", f.in, "Input corpus (canonical JSON)")->required();
  sub->add_option("--category", f.category, "Taxonomy path, e.g. training/labeling/instance")->required();
  sub->add_option("--rate", f.rate, "Fraction of eligible examples to corrupt")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "Master seed")->capture_default_str();
  sub->add_option("--params", f.params, "Category parameters as JSON, or @file");
  sub->add_option("--target", f.target, "Label field for class/annotator noise: class_labels|dialog_acts");
  sub->add_option("--kind", f.kind, "Annotator spam kind: spam_class|spam_generation");
  sub->add_option("--speaker", f.speaker, "Discourse noise: only corrupt this speaker's turns");
  sub->add_option("--window-size", f.window_size, "Instance noise: recent-label window in turns");
  sub->add_option("--schema", f.schema, "Ontology schema (ontology variants)");
  sub->add_option("--embeddings", f.embeddings, "GloVe text file for structured class noise");
  sub->add_option("--paraphrase-file", f.paraphrase_file, "JSONL paraphrases {example_id, text}");
  sub->add_option("--paraphrase-url", f.paraphrase_url, "Paraphrase service base URL");
  sub->add_option("--variant-tables", o.variant_tables, "Override the shipped variant tables");
  sub->add_option("--asr-table", o.asr_table, "Override the shipped ASR confusion table");
  sub->add_option("--keyboard", o.keyboard, "Override the shipped keyboard adjacency table");
  sub->add_option("--unnatural-phrases", o.unnatural_phrases, "Override the shipped unnatural phrases");
  sub->add_option("--generic-phrases", o.generic_phrases, "Override the shipped generic spam phrases");
  sub->add_option("--timeout", svc.timeout_s, "Service timeout in seconds")->capture_default_str();
  sub->add_option("--retries", svc.retries, "Service retries")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue noise toolkit: inject, audit, clean, calibrate and denoise dialogue corpora",
               args.empty() ? "dialnoise" : fs::path(args[0]).filename().string()};
  app.set_config("--config", "", "TOML file presetting flags; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  TableOverrides overrides;
  ServiceFlags service;
  InjectFlags inj;
  AuditFlags aud;
  CleanFlags cln;
  CalibrateFlags cal;
  DenoiseFlags den;
  SplitFlags spl;
  EvalFlags evl;
  StatsFlags sta;

  auto* inject_cmd = app.add_subcommand("inject", "Corrupt a corpus with one noise category");
  add_injection_flags(inject_cmd, inj, overrides, service);
  inject_cmd->add_option("--out", inj.out, "Output corpus")->required();
  inject_cmd->add_option("--log", inj.log, "Injection log (JSONL)");
  inject_cmd->add_option("--skipped", inj.skipped, "Skipped examples (JSONL)");
  add_common(inject_cmd, common, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "Corrupt a corpus at several noise levels");
  add_injection_flags(sweep_cmd, inj, overrides, service);
  sweep_cmd->add_option("--levels", inj.levels, "Comma-separated sorted levels in [0,1]")->required();
  sweep_cmd->add_option("--out-dir", inj.out_dir, "Directory for level_<x>.json and logs")->required();
  add_common(sweep_cmd, common, true);

  auto* audit_cmd = app.add_subcommand("audit", "Aggregate audit tallies into a prevalence report");
  audit_cmd->add_option("--in", aud.in, "Tallies JSON")->required();
  add_common(audit_cmd, common, false);
  audit_cmd->get_option("--format")->description("Report format: text, json or compact");

  auto* clean_cmd = app.add_subcommand("clean", "Enforce an ontology schema on belief-state values");
  clean_cmd->add_option("--in", cln.in, "Input corpus")->required();
  clean_cmd->add_option("--out", cln.out, "Cleaned corpus")->required();
  clean_cmd->add_option("--schema", cln.schema, "Ontology schema")->required();
  clean_cmd->add_option("--policy", cln.policy, "drop_example|drop_value|normalize_first")->capture_default_str();
  clean_cmd->add_option("--report", cln.report, "Write the cleaning ledger (JSON) here");
  add_common(clean_cmd, common, false);

  auto* cal_cmd = app.add_subcommand("calibrate", "Fit a softmax temperature on dev logits");
  cal_cmd->add_option("--dev", cal.dev, "Dev logits JSONL with gold labels")->required();
  cal_cmd->add_option("--grid", cal.grid, "Comma-separated temperatures (default 1.3,1.5,1.7,1.9)");
  cal_cmd->add_option("--bins", cal.bins, "ECE bins")->check(CLI::Range(1ul, 1000ul))->capture_default_str();
  add_common(cal_cmd, common, false);

  auto* den_cmd = app.add_subcommand("denoise", "Ontology clean, disagreement filter and co-teaching");
  den_cmd->add_option("--in", den.in, "Noisy corpus")->required();
  den_cmd->add_option("--out", den.out, "Denoised corpus")->required();
  den_cmd->add_option("--steps", den.steps, "Comma-separated subset of ontology,filter,coteach; empty for none")
      ->capture_default_str();
  den_cmd->add_option("--pred-a", den.pred_a, "Filter predictor JSONL");
  den_cmd->add_option("--pred-b", den.pred_b, "Pseudo-label predictor JSONL");
  den_cmd->add_option("--pred-a-url", den.pred_a_url, "Filter predictor service URL");
  den_cmd->add_option("--pred-b-url", den.pred_b_url, "Pseudo-label predictor service URL");
  den_cmd->add_option("--threshold", den.threshold, "Re-add when calibrated confidence exceeds this")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  den_cmd->add_option("--temperature", den.temperature, "Softmax temperature for pseudo-labels");
  den_cmd->add_option("--dev", den.dev, "Dev logits JSONL to fit the temperature on");
  den_cmd->add_option("--schema", den.schema, "Ontology schema (defaults to none)");
  den_cmd->add_option("--policy", den.policy, "Ontology cleaning policy")->capture_default_str();
  den_cmd->add_option("--match", den.match, "exact_state|per_slot")->capture_default_str();
  den_cmd->add_option("--target", den.target, "class_labels|dialog_acts");
  den_cmd->add_option("--report", den.report, "Write counts and provenance (JSON) here");
  den_cmd->add_option("--timeout", service.timeout_s, "Service timeout in seconds")->capture_default_str();
  den_cmd->add_option("--retries", service.retries, "Service retries")->capture_default_str();
  add_common(den_cmd, common, true);

  auto* split_cmd = app.add_subcommand("split-ood", "Hold out domains from training");
  split_cmd->add_option("--in", spl.in, "Training pool corpus")->required();
  split_cmd->add_option("--test", spl.test, "Test corpus (default: the training pool)");
  split_cmd->add_option("--holdout", spl.holdout, "Comma-separated domains to hold out");
  split_cmd->add_flag("--leave-one-out", spl.leave_one_out, "One split per domain");
  split_cmd->add_option("--out-dir", spl.out_dir, "Output directory")->required();
  add_common(split_cmd, common, false);

  auto* eval_cmd = app.add_subcommand("eval", "Score predictions or summarize a noise-impact table");
  eval_cmd->add_option("--metric", evl.metric, "jga|acc|bleu");
  eval_cmd->add_option("--pred", evl.pred, "Predictions JSONL (bleu: {example_id, text} lines)");
  eval_cmd->add_option("--gold", evl.gold, "Gold corpus");
  eval_cmd->add_option("--max-n", evl.max_n, "BLEU n-gram order")->check(CLI::Range(1, 8))->capture_default_str();
  eval_cmd->add_option("--impact", evl.impact, "Clean/noisy score rows (JSON) to report degradation");
  add_common(eval_cmd, common, false);

  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("--in", sta.in, "Corpus")->required();
  add_common(stats_cmd, common, false);

  try {
    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (inject_cmd->parsed()) return cmd_inject(inj, overrides, service, common, out);
    if (sweep_cmd->parsed()) return cmd_sweep(inj, overrides, service, common, out);
    if (audit_cmd->parsed()) return cmd_audit(aud, common, out);
    if (clean_cmd->parsed()) return cmd_clean(cln, common, out);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, common, out);
    if (den_cmd->parsed()) return cmd_denoise(den, service, common, out, err);
    if (split_cmd->parsed()) return cmd_split(spl, common, out);
    if (eval_cmd->parsed()) return cmd_eval(evl, common, out);
    if (stats_cmd->parsed()) return cmd_stats(sta, common, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 1;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace dialnoise::cli
