#include "dialnoise/injector.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dialnoise/error.hpp"
#include "dialnoise/random.hpp"
#include "dialnoise/text_noise.hpp"

namespace dialnoise {

namespace {

constexpr std::uint64_t kClassStream = 0xc1a55;
constexpr std::uint64_t kInstanceStream = 0x1257a;
constexpr std::uint64_t kAnnotatorStream = 0xa2207;
constexpr std::uint64_t kDiscourseStream = 0xd15c0;
constexpr std::uint64_t kOntologyStream = 0x0270;
constexpr std::uint64_t kBreakdownStream = 0xb2ea4;

constexpr std::string_view kActionNames[] = {
    "swap", "insert", "replace", "drop", "rewrite", "spam",
    "truncate_span", "shuffle", "substitute_sentence", "perturb"};

struct Location {
  std::size_t dialogue = 0;
  std::size_t turn = 0;
};

std::map<ExampleId, Location> index_turns(const Corpus& corpus) {
  std::map<ExampleId, Location> out;
  for (std::size_t d = 0; d < corpus.dialogues.size(); ++d) {
    const auto& dlg = corpus.dialogues[d];
    for (std::size_t t = 0; t < dlg.turns.size(); ++t)
      out.emplace(ExampleId{dlg.dialogue_id, dlg.turns[t].turn_id}, Location{d, t});
  }
  return out;
}

template <typename Pred>
std::vector<ExampleId> eligible_ids(const Corpus& corpus, Pred pred) {
  std::vector<ExampleId> ids;
  for (std::size_t d = 0; d < corpus.dialogues.size(); ++d) {
    const auto& dlg = corpus.dialogues[d];
    for (std::size_t t = 0; t < dlg.turns.size(); ++t)
      if (pred(dlg, t)) ids.push_back({dlg.dialogue_id, dlg.turns[t].turn_id});
  }
  return ids;
}

struct Outcome {
  std::optional<Turn> turn;
  std::optional<LogRecord> record;
  std::optional<SkipRecord> skip;
};

// Runs fn over ids on `jobs` threads. Results land at their input index, so
// the output does not depend on scheduling. The exception of the lowest
// failing index is rethrown.
template <typename Fn>
std::vector<Outcome> run_parallel(const std::vector<ExampleId>& ids, unsigned jobs, Fn fn) {
  std::vector<Outcome> out(ids.size());
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(ids.size(), 1));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, ids.size());
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < ids.size(); i += workers) {
      try {
        out[i] = fn(ids[i]);
      } catch (...) {
        errors[w] = std::current_exception();
        error_index[w] = i;
        return;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& th : threads) th.join();
  }
  std::size_t first = ids.size();
  std::exception_ptr err;
  for (std::size_t w = 0; w < workers; ++w)
    if (errors[w] && error_index[w] < first) {
      first = error_index[w];
      err = errors[w];
    }
  if (err) std::rethrow_exception(err);
  return out;
}

InjectionResult apply_outcomes(const Corpus& corpus, const std::map<ExampleId, Location>& index,
                               const std::vector<ExampleId>& ids, std::vector<Outcome>& outcomes) {
  InjectionResult result{corpus, {}, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& o = outcomes[i];
    if (o.turn) {
      const auto& loc = index.at(ids[i]);
      result.corpus.dialogues[loc.dialogue].turns[loc.turn] = std::move(*o.turn);
    }
    if (o.record) result.log.push_back(std::move(*o.record));
    if (o.skip) result.skipped.push_back(std::move(*o.skip));
  }
  auto by_id = [](const auto& a, const auto& b) { return a.example_id < b.example_id; };
  std::stable_sort(result.log.begin(), result.log.end(), by_id);
  std::stable_sort(result.skipped.begin(), result.skipped.end(), by_id);
  return result;
}

Rng rng_for(const InjectOptions& opts, const ExampleId& id, std::uint64_t stream) {
  return Rng(example_seed(opts.seed, id.dialogue_id, id.turn_id, stream));
}

const std::vector<std::string>& target_list(const Turn& t, LabelTarget target) {
  return target == LabelTarget::class_labels ? t.labels.class_labels : t.labels.dialog_acts;
}
std::vector<std::string>& target_list(Turn& t, LabelTarget target) {
  return target == LabelTarget::class_labels ? t.labels.class_labels : t.labels.dialog_acts;
}

Json state_json(const std::vector<SlotValue>& state) {
  Json a = Json::array();
  for (const auto& sv : state) a.push_back(to_json(sv));
  return a;
}

Json span_json(const Span& s, std::string_view text) {
  Json j = Json::object();
  j["label"] = s.label;
  j["start"] = s.start;
  j["end"] = s.end;
  const auto b = static_cast<std::size_t>(std::clamp<std::int64_t>(s.start, 0, static_cast<std::int64_t>(text.size())));
  const auto e = static_cast<std::size_t>(std::clamp<std::int64_t>(s.end, static_cast<std::int64_t>(b), static_cast<std::int64_t>(text.size())));
  j["text"] = std::string(text.substr(b, e - b));
  return j;
}

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i = text::next_code_point(s, i)) ++n;
  return n;
}

bool has_ascii_letter(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); });
}

// Moves spans onto the same substring in the rewritten text (the occurrence
// closest to the old offset). Spans whose text is gone are dropped; the
// count is returned.
std::size_t relocate_spans(const std::string& old_text, const std::string& new_text,
                           std::vector<Span>& spans) {
  std::vector<Span> kept;
  std::size_t dropped = 0;
  for (const auto& s : spans) {
    const std::string piece = old_text.substr(static_cast<std::size_t>(s.start),
                                              static_cast<std::size_t>(s.end - s.start));
    std::optional<std::size_t> best;
    for (std::size_t p = new_text.find(piece); p != std::string::npos && !piece.empty();
         p = new_text.find(piece, p + 1)) {
      const auto dist = [&](std::size_t q) {
        return q > static_cast<std::size_t>(s.start) ? q - static_cast<std::size_t>(s.start)
                                                     : static_cast<std::size_t>(s.start) - q;
      };
      if (!best || dist(p) < dist(*best)) best = p;
    }
    if (best) {
      kept.push_back({s.label, static_cast<std::int64_t>(*best),
                      static_cast<std::int64_t>(*best + piece.size())});
    } else {
      ++dropped;
    }
  }
  spans = std::move(kept);
  return dropped;
}

// Rewrites the turn text, keeps spans consistent, and builds the log record.
Outcome text_outcome(const Turn& turn, const ExampleId& id, NoiseCategory cat, InjectAction action,
                     std::string new_text, std::string detail) {
  Turn t = turn;
  const std::size_t dropped = relocate_spans(turn.text, new_text, t.labels.spans);
  if (dropped) {
    if (!detail.empty()) detail += "; ";
    detail += "dropped " + std::to_string(dropped) + " span(s)";
  }
  t.text = std::move(new_text);
  LogRecord r{id, cat, action, turn.text, t.text, std::move(detail)};
  return {std::move(t), std::move(r), std::nullopt};
}

void require_rate(const InjectOptions& opts) {
  if (!(opts.rate >= 0.0 && opts.rate <= 1.0)) throw Error("rate must lie in [0, 1]");
}

}  // namespace

std::string_view to_string(InjectAction a) { return kActionNames[static_cast<std::size_t>(a)]; }

InjectAction parse_inject_action(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kActionNames); ++i)
    if (kActionNames[i] == s) return static_cast<InjectAction>(i);
  throw ParseError("unknown injection action '" + std::string(s) + "'");
}

Json to_json(const LogRecord& r) {
  Json j = Json::object();
  j["example_id"] = r.example_id.str();
  j["category"] = r.category.render();
  j["action"] = std::string(to_string(r.action));
  j["before"] = r.before;
  j["after"] = r.after;
  j["detail"] = r.detail;
  return j;
}

LogRecord log_record_from_json(const Json& j) {
  try {
    LogRecord r;
    r.example_id = ExampleId::parse(j.at("example_id").get<std::string>());
    r.category = parse_category_node(j.at("category").get<std::string>());
    r.action = parse_inject_action(j.at("action").get<std::string>());
    r.before = j.at("before");
    r.after = j.at("after");
    r.detail = j.value("detail", "");
    return r;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("log record: ") + e.what());
  }
}

std::string dump_log(const std::vector<LogRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_log(const std::vector<LogRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump_log(log);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<LogRecord> load_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LogRecord> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      log.push_back(log_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

// Class-level ---------------------------------------------------------------

LabelTarget parse_label_target(std::string_view s) {
  if (s == "class_labels") return LabelTarget::class_labels;
  if (s == "dialog_acts") return LabelTarget::dialog_acts;
  throw ParseError("unknown label target '" + std::string(s) + "' (class_labels|dialog_acts)");
}

std::vector<std::string> observed_labels(const Corpus& corpus, LabelTarget target) {
  std::set<std::string> labels;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns)
      for (const auto& l : target_list(t, target)) labels.insert(l);
  return {labels.begin(), labels.end()};
}

InjectionResult inject_class_noise(const Corpus& corpus, const ClassNoiseParams& params,
                                   const InjectOptions& opts) {
  require_rate(opts);
  const auto labels = observed_labels(corpus, params.target);
  const NoiseCategory cat = params.mode == ClassNoiseMode::uniform ? NoiseCategory::Id::ClassUniform
                                                                   : NoiseCategory::Id::ClassStructured;
  if (params.mode == ClassNoiseMode::structured) {
    if (!params.matrix) throw Error("structured class noise needs a transition matrix");
    std::vector<std::string> missing;
    for (const auto& l : labels)
      if (params.matrix->index(l) < 0) missing.push_back(l);
    if (!missing.empty()) {
      std::string msg = "labels absent from transition matrix:";
      for (const auto& m : missing) msg += " " + m;
      throw SchemaError(msg);
    }
  }
  auto ids = eligible_ids(corpus, [&](const Dialogue& d, std::size_t t) {
    return !target_list(d.turns[t], params.target).empty();
  });
  if (!ids.empty() && labels.size() < 2)
    throw Error("class noise needs at least 2 distinct labels");
  const auto sel = select_units(std::move(ids), opts.rate, opts.seed);
  const auto index = index_turns(corpus);

  auto outcomes = run_parallel(sel.example_ids, opts.jobs, [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    Turn turn = corpus.dialogues[loc.dialogue].turns[loc.turn];
    Rng rng = rng_for(opts, id, kClassStream);
    auto& list = target_list(turn, params.target);
    const Json before = list;
    const std::size_t k = rng.below(list.size());
    const std::string original = list[k];
    if (params.mode == ClassNoiseMode::uniform) {
      std::vector<std::string> others;
      for (const auto& l : labels)
        if (l != original) others.push_back(l);
      list[k] = rng.pick(others);
    } else {
      const auto& m = *params.matrix;
      const Eigen::VectorXd row = m.rows.row(m.index(original));
      std::vector<double> w(row.data(), row.data() + row.size());
      list[k] = m.labels[rng.weighted(w)];
    }
    LogRecord r{id, cat, InjectAction::swap, before, list, original + " -> " + list[k]};
    return Outcome{std::move(turn), std::move(r), std::nullopt};
  });
  return apply_outcomes(corpus, index, sel.example_ids, outcomes);
}

// Instance-level ------------------------------------------------------------

std::vector<SlotValue> recent_label_pool(const Dialogue& dialogue, std::size_t turn_index,
                                         std::size_t window) {
  std::set<SlotValue> pool;
  std::size_t used = 0;
  for (std::size_t i = turn_index; i > 0 && used < window; --i) {
    const auto& state = dialogue.turns[i - 1].labels.belief_state;
    if (state.empty()) continue;
    pool.insert(state.begin(), state.end());
    ++used;
  }
  return {pool.begin(), pool.end()};
}

namespace {

struct InstanceChoices {
  std::vector<SlotValue> over;                                 // values to insert
  bool over_fallback = false;
  std::vector<std::pair<std::size_t, std::string>> partial;    // (state index, new value)
  bool partial_fallback = false;
  std::size_t under = 0;                                       // state size

  std::vector<InstanceKind> feasible() const {
    std::vector<InstanceKind> k;
    if (!over.empty()) k.push_back(InstanceKind::over);
    if (!partial.empty()) k.push_back(InstanceKind::partial);
    if (under > 0) k.push_back(InstanceKind::under);
    return k;
  }
};

std::vector<SlotValue> over_candidates(const std::vector<SlotValue>& state,
                                       const std::vector<SlotValue>& source) {
  std::set<std::pair<std::string, std::string>> taken;
  for (const auto& sv : state) taken.insert({sv.domain, sv.slot});
  std::vector<SlotValue> out;
  for (const auto& sv : source)
    if (!taken.count({sv.domain, sv.slot})) out.push_back(sv);
  return out;
}

std::vector<std::pair<std::size_t, std::string>> partial_candidates(
    const std::vector<SlotValue>& state, const std::vector<std::string>& values) {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 0; i < state.size(); ++i)
    for (const auto& v : values)
      if (v != state[i].value) out.push_back({i, v});
  return out;
}

std::vector<std::string> distinct_values(const std::vector<SlotValue>& svs) {
  std::set<std::string> vs;
  for (const auto& sv : svs) vs.insert(sv.value);
  return {vs.begin(), vs.end()};
}

InstanceChoices instance_choices(const std::vector<SlotValue>& state,
                                 const std::vector<SlotValue>& pool,
                                 const std::vector<SlotValue>& corpus_pool,
                                 const std::vector<std::string>& corpus_values) {
  InstanceChoices c;
  c.over = over_candidates(state, pool);
  if (c.over.empty()) {
    c.over = over_candidates(state, corpus_pool);
    c.over_fallback = !c.over.empty();
  }
  c.partial = partial_candidates(state, distinct_values(pool));
  if (c.partial.empty()) {
    c.partial = partial_candidates(state, corpus_values);
    c.partial_fallback = !c.partial.empty();
  }
  c.under = state.size();
  return c;
}

}  // namespace

InjectionResult inject_instance_noise(const Corpus& corpus, const InstanceNoiseParams& params,
                                      const InjectOptions& opts) {
  require_rate(opts);
  if (params.window_size == 0) throw Error("window_size must be positive");
  std::set<SlotValue> all;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) all.insert(t.labels.belief_state.begin(), t.labels.belief_state.end());
  if (all.empty()) throw Error("instance noise needs belief_state labels; the corpus has none");
  const std::vector<SlotValue> corpus_pool(all.begin(), all.end());
  const auto corpus_values = distinct_values(corpus_pool);

  auto feasible_here = [&](const Dialogue& d, std::size_t t) {
    const auto& turn = d.turns[t];
    const auto& state = turn.labels.belief_state;
    // Turns without a state only count on the user side, where a tracker
    // would have produced one.
    if (state.empty() && turn.speaker != Speaker::user) return false;
    const auto pool = recent_label_pool(d, t, params.window_size);
    if (state.empty() && pool.empty()) return false;
    auto c = instance_choices(state, pool, corpus_pool, corpus_values);
    auto f = c.feasible();
    if (params.forced) return std::find(f.begin(), f.end(), *params.forced) != f.end();
    return !f.empty();
  };
  auto ids = eligible_ids(corpus, feasible_here);
  const auto sel = select_units(std::move(ids), opts.rate, opts.seed);
  const auto index = index_turns(corpus);

  auto outcomes = run_parallel(sel.example_ids, opts.jobs, [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    const Dialogue& dlg = corpus.dialogues[loc.dialogue];
    Turn turn = dlg.turns[loc.turn];
    auto& state = turn.labels.belief_state;
    const Json before = state_json(state);
    const auto pool = recent_label_pool(dlg, loc.turn, params.window_size);
    const auto c = instance_choices(state, pool, corpus_pool, corpus_values);
    Rng rng = rng_for(opts, id, kInstanceStream);
    const auto feasible = c.feasible();
    const InstanceKind kind = params.forced ? *params.forced : rng.pick(feasible);
    LogRecord r{id, NoiseCategory::Id::InstanceOver, InjectAction::insert, before, {}, {}};
    switch (kind) {
      case InstanceKind::over: {
        const SlotValue sv = rng.pick(c.over);
        state.push_back(sv);
        r.detail = std::string(c.over_fallback ? "corpus fallback" : "pool") + ": +" + sv.domain +
                   "." + sv.slot + "=" + sv.value;
        break;
      }
      case InstanceKind::partial: {
        const auto& [i, value] = rng.pick(c.partial);
        r.category = NoiseCategory::Id::InstancePartial;
        r.action = InjectAction::replace;
        r.detail = std::string(c.partial_fallback ? "corpus fallback" : "pool") + ": " +
                   state[i].domain + "." + state[i].slot + " " + state[i].value + " -> " + value;
        state[i].value = value;
        break;
      }
      case InstanceKind::under: {
        const std::size_t i = rng.below(state.size());
        r.category = NoiseCategory::Id::InstanceUnder;
        r.action = InjectAction::drop;
        r.detail = "-" + state[i].domain + "." + state[i].slot + "=" + state[i].value;
        state.erase(state.begin() + static_cast<long>(i));
        break;
      }
    }
    r.after = state_json(state);
    return Outcome{std::move(turn), std::move(r), std::nullopt};
  });
  return apply_outcomes(corpus, index, sel.example_ids, outcomes);
}

// Annotator-level -----------------------------------------------------------

AnnotatorKind parse_annotator_kind(std::string_view s) {
  if (s == "spam_class") return AnnotatorKind::spam_class;
  if (s == "spam_generation") return AnnotatorKind::spam_generation;
  if (s == "formatting") return AnnotatorKind::formatting;
  throw ParseError("unknown annotator noise kind '" + std::string(s) + "'");
}

std::vector<std::string> top_labels(const Corpus& corpus, LabelTarget target, std::size_t k) {
  std::map<std::string, std::size_t> freq;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns)
      for (const auto& l : target_list(t, target)) ++freq[l];
  std::vector<std::pair<std::string, std::size_t>> v(freq.begin(), freq.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, v.size()); ++i) out.push_back(v[i].first);
  return out;
}

namespace {

enum class FormatMethod { truncate, typo };

struct FormatTargets {
  std::vector<std::size_t> truncate_spans, typo_spans, truncate_values, typo_values;

  bool can_truncate() const { return !truncate_spans.empty() || !truncate_values.empty(); }
  bool can_typo() const { return !typo_spans.empty() || !typo_values.empty(); }
};

FormatTargets format_targets(const Turn& t) {
  FormatTargets f;
  for (std::size_t i = 0; i < t.labels.spans.size(); ++i) {
    const auto& s = t.labels.spans[i];
    const std::string_view piece =
        std::string_view(t.text).substr(static_cast<std::size_t>(s.start),
                                        static_cast<std::size_t>(s.end - s.start));
    if (code_points(piece) >= 2) f.truncate_spans.push_back(i);
    if (has_ascii_letter(piece)) f.typo_spans.push_back(i);
  }
  for (std::size_t i = 0; i < t.labels.belief_state.size(); ++i) {
    const auto& v = t.labels.belief_state[i].value;
    if (code_points(v) >= 2) f.truncate_values.push_back(i);
    if (has_ascii_letter(v)) f.typo_values.push_back(i);
  }
  return f;
}

// Off-by-one selection: the highlighted region starts one character late
// and, when the text allows, runs one character past the end.
std::pair<std::size_t, std::size_t> shifted_window(std::string_view text, std::size_t b, std::size_t e) {
  const std::size_t nb = text::next_code_point(text, b);
  const std::size_t ne = e < text.size() ? text::next_code_point(text, e) : e;
  return {nb, ne};
}

Outcome format_noise(const Turn& original, const ExampleId& id, Rng& rng,
                     const std::map<char, std::string>& neighbors) {
  Turn turn = original;
  const auto f = format_targets(turn);
  std::vector<FormatMethod> methods;
  if (f.can_truncate()) methods.push_back(FormatMethod::truncate);
  if (f.can_typo()) methods.push_back(FormatMethod::typo);
  const FormatMethod method = rng.pick(methods);
  LogRecord r{id, NoiseCategory::Id::AnnotatorFormatting, InjectAction::truncate_span, {}, {}, {}};

  // Spans and values form one pool of targets for the chosen method.
  const auto& spans = method == FormatMethod::truncate ? f.truncate_spans : f.typo_spans;
  const auto& values = method == FormatMethod::truncate ? f.truncate_values : f.typo_values;
  const std::size_t pick = rng.below(spans.size() + values.size());

  if (pick < spans.size()) {
    Span& s = turn.labels.spans[spans[pick]];
    r.before = span_json(s, turn.text);
    if (method == FormatMethod::truncate) {
      auto [nb, ne] = shifted_window(turn.text, static_cast<std::size_t>(s.start), static_cast<std::size_t>(s.end));
      s.start = static_cast<std::int64_t>(nb);
      s.end = static_cast<std::int64_t>(ne);
      r.detail = "span truncated";
    } else {
      const auto b = static_cast<std::size_t>(s.start);
      std::string piece = turn.text.substr(b, static_cast<std::size_t>(s.end - s.start));
      piece = *text::substitute_letter(piece, neighbors, rng);
      turn.text.replace(b, piece.size(), piece);
      r.action = InjectAction::perturb;
      r.detail = "typo in span text";
    }
    r.after = span_json(s, turn.text);
  } else {
    SlotValue& sv = turn.labels.belief_state[values[pick - spans.size()]];
    r.before = to_json(sv);
    if (method == FormatMethod::truncate) {
      const std::string hay = casefold(turn.text);
      const std::string needle = casefold(sv.value);
      // casefold trims; only use the text when the value occurs verbatim.
      const std::size_t p = needle.size() == sv.value.size() ? hay.find(needle) : std::string::npos;
      if (p != std::string::npos) {
        auto [nb, ne] = shifted_window(turn.text, p, p + needle.size());
        sv.value = turn.text.substr(nb, ne - nb);
        r.detail = "value re-read from text off by one";
      } else {
        sv.value = sv.value.substr(text::next_code_point(sv.value, 0));
        r.detail = "leading character dropped";
      }
    } else {
      sv.value = *text::substitute_letter(sv.value, neighbors, rng);
      r.action = InjectAction::perturb;
      r.detail = "typo in value";
    }
    r.after = to_json(sv);
  }
  return {std::move(turn), std::move(r), std::nullopt};
}

}  // namespace

InjectionResult inject_annotator_noise(const Corpus& corpus, const AnnotatorNoiseParams& params,
                                       const InjectOptions& opts) {
  require_rate(opts);
  const auto index = index_turns(corpus);
  std::vector<ExampleId> ids;
  std::vector<std::string> top;
  switch (params.kind) {
    case AnnotatorKind::spam_class:
      top = top_labels(corpus, params.target, 3);
      if (top.size() < 3)
        throw Error("spam_class needs at least 3 distinct labels, found " + std::to_string(top.size()));
      ids = eligible_ids(corpus, [&](const Dialogue& d, std::size_t t) {
        return !target_list(d.turns[t], params.target).empty();
      });
      break;
    case AnnotatorKind::spam_generation:
      if (params.generic_phrases.empty()) throw Error("spam_generation needs generic_phrases");
      ids = eligible_ids(corpus, [](const Dialogue& d, std::size_t t) {
        return d.turns[t].labels.reference_response.has_value();
      });
      break;
    case AnnotatorKind::formatting:
      ids = eligible_ids(corpus, [](const Dialogue& d, std::size_t t) {
        const auto f = format_targets(d.turns[t]);
        return f.can_truncate() || f.can_typo();
      });
      break;
  }
  const auto sel = select_units(std::move(ids), opts.rate, opts.seed);

  auto outcomes = run_parallel(sel.example_ids, opts.jobs, [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    const Turn& original = corpus.dialogues[loc.dialogue].turns[loc.turn];
    Rng rng = rng_for(opts, id, kAnnotatorStream);
    if (params.kind == AnnotatorKind::formatting)
      return format_noise(original, id, rng, params.keyboard_neighbors);
    Turn turn = original;
    LogRecord r{id, NoiseCategory::Id::AnnotatorAdversarial, InjectAction::spam, {}, {}, {}};
    if (params.kind == AnnotatorKind::spam_class) {
      auto& list = target_list(turn, params.target);
      r.before = list;
      const std::size_t k = rng.below(list.size());
      const std::string& spam = rng.pick(top);
      r.detail = list[k] == spam ? "spam equals original" : list[k] + " -> " + spam;
      list[k] = spam;
      r.after = list;
    } else {
      r.before = *turn.labels.reference_response;
      turn.labels.reference_response = rng.pick(params.generic_phrases);
      r.after = *turn.labels.reference_response;
      if (r.before == r.after) r.detail = "spam equals original";
    }
    return Outcome{std::move(turn), std::move(r), std::nullopt};
  });
  return apply_outcomes(corpus, index, sel.example_ids, outcomes);
}

// Discourse -----------------------------------------------------------------

DiscourseKind parse_discourse_kind(std::string_view s) {
  if (s == "incoherent") return DiscourseKind::incoherent;
  if (s == "disfluent") return DiscourseKind::disfluent;
  if (s == "unnatural") return DiscourseKind::unnatural;
  throw ParseError("unknown discourse noise kind '" + std::string(s) + "'");
}

InjectionResult inject_discourse_noise(const Corpus& corpus, const DiscourseNoiseParams& params,
                                       const InjectOptions& opts) {
  require_rate(opts);
  if (params.kind == DiscourseKind::incoherent && corpus.dialogues.size() < 2)
    throw Error("incoherent discourse noise needs at least 2 dialogues");
  if (params.kind == DiscourseKind::unnatural && params.unnatural_phrases.empty())
    throw Error("unnatural discourse noise needs a non-empty phrase list");

  // Source sentences for incoherent noise, grouped per dialogue.
  std::vector<Location> sources;
  std::vector<std::pair<std::size_t, std::size_t>> block(corpus.dialogues.size());
  for (std::size_t d = 0; d < corpus.dialogues.size(); ++d) {
    block[d].first = sources.size();
    for (std::size_t t = 0; t < corpus.dialogues[d].turns.size(); ++t)
      if (!trim(corpus.dialogues[d].turns[t].text).empty()) sources.push_back({d, t});
    block[d].second = sources.size();
  }

  auto ids = eligible_ids(corpus, [&](const Dialogue& d, std::size_t t) {
    const Turn& turn = d.turns[t];
    if (params.speaker && turn.speaker != *params.speaker) return false;
    if (params.kind == DiscourseKind::disfluent) return text::split_tokens(turn.text).size() >= 2;
    return !trim(turn.text).empty();
  });
  const auto sel = select_units(std::move(ids), opts.rate, opts.seed);
  const auto index = index_turns(corpus);

  auto outcomes = run_parallel(sel.example_ids, opts.jobs, [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    const Turn& turn = corpus.dialogues[loc.dialogue].turns[loc.turn];
    Rng rng = rng_for(opts, id, kDiscourseStream);
    switch (params.kind) {
      case DiscourseKind::incoherent: {
        const auto [b, e] = block[loc.dialogue];
        const std::size_t outside = sources.size() - (e - b);
        if (outside == 0) throw Error("no other dialogue has text to borrow for " + id.str());
        std::size_t r = rng.below(outside);
        if (r >= b) r += e - b;
        const auto& src = sources[r];
        const auto& sd = corpus.dialogues[src.dialogue];
        return text_outcome(turn, id, NoiseCategory::Id::DiscourseIncoherent,
                            InjectAction::substitute_sentence, sd.turns[src.turn].text,
                            "source " + ExampleId{sd.dialogue_id, sd.turns[src.turn].turn_id}.str());
      }
      case DiscourseKind::disfluent:
        return text_outcome(turn, id, NoiseCategory::Id::DiscourseDisfluent, InjectAction::shuffle,
                            text::shuffle_tokens(turn.text, rng), "");
      case DiscourseKind::unnatural:
        return text_outcome(turn, id, NoiseCategory::Id::DiscourseUnnatural,
                            InjectAction::substitute_sentence, rng.pick(params.unnatural_phrases), "");
    }
    return Outcome{};
  });
  return apply_outcomes(corpus, index, sel.example_ids, outcomes);
}

// Ontology variants ---------------------------------------------------------

namespace {

NoiseCategory ontology_category(std::string_view kind) {
  if (kind == "time") return NoiseCategory::Id::OntologyTime;
  if (kind == "date") return NoiseCategory::Id::OntologyDate;
  if (kind == "location") return NoiseCategory::Id::OntologyLocation;
  return NoiseCategory::Id::OntologyNumber;
}

}  // namespace

InjectionResult inject_ontology_variants(const Corpus& corpus, const OntologyVariantParams& params,
                                         const InjectOptions& opts) {
  require_rate(opts);
  const auto schema = params.schema ? params.schema : corpus.ontology;
  if (!schema) throw Error("ontology variants need an ontology schema");
  std::set<std::string> kinds = params.kinds;
  if (kinds.empty())
    for (const auto& [key, rule] : schema->slots)
      if (auto k = variant_kind(rule.kind); !k.empty()) kinds.insert(std::string(k));
  for (const auto& k : kinds) {
    if (k != "time" && k != "date" && k != "location" && k != "number")
      throw Error("unknown variant kind '" + k + "' (time|date|location|number)");
    auto it = params.tables.find(k);
    if (it == params.tables.end() || it->second.empty())
      throw Error("empty variant table for kind '" + k + "'");
  }

  auto kind_of = [&](const SlotValue& sv) -> std::string {
    const FormatRule* rule = schema->rule_for(sv.domain, sv.slot);
    if (!rule) return "";
    std::string k(variant_kind(rule->kind));
    return kinds.count(k) ? k : "";
  };
  auto ids = eligible_ids(corpus, [&](const Dialogue& d, std::size_t t) {
    const auto& state = d.turns[t].labels.belief_state;
    return std::any_of(state.begin(), state.end(), [&](const SlotValue& sv) { return !kind_of(sv).empty(); });
  });
  const std::size_t target = quota(opts.rate, ids.size());
  const auto ranked = rank_units(std::move(ids), opts.seed);
  const auto index = index_turns(corpus);

  auto attempt = [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    Turn turn = corpus.dialogues[loc.dialogue].turns[loc.turn];
    auto& state = turn.labels.belief_state;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> options;
    std::string kinds_seen;
    for (std::size_t i = 0; i < state.size(); ++i) {
      const std::string k = kind_of(state[i]);
      if (k.empty()) continue;
      auto variants = text::value_variants(state[i].value, k, params.tables.at(k));
      if (!variants.empty()) options.push_back({i, std::move(variants)});
    }
    if (options.empty())
      return Outcome{std::nullopt, std::nullopt, SkipRecord{id, "no variant rule matches any value"}};
    Rng rng = rng_for(opts, id, kOntologyStream);
    const auto& [i, variants] = rng.pick(options);
    SlotValue& sv = state[i];
    LogRecord r{id, ontology_category(kind_of(sv)), InjectAction::rewrite, to_json(sv), {}, {}};
    const std::string& variant = rng.pick(variants);
    r.detail = sv.value + " -> " + variant;
    sv.value = variant;
    r.after = to_json(sv);
    return Outcome{std::move(turn), std::move(r), std::nullopt};
  };

  // Visit candidates in rank order, a batch at a time, until the quota of
  // successful rewrites is met.
  std::vector<ExampleId> visited;
  std::vector<Outcome> outcomes;
  std::size_t successes = 0;
  std::size_t next = 0;
  while (successes < target && next < ranked.size()) {
    const std::size_t batch = std::min(target - successes, ranked.size() - next);
    std::vector<ExampleId> ids_batch(ranked.begin() + static_cast<long>(next),
                                     ranked.begin() + static_cast<long>(next + batch));
    auto got = run_parallel(ids_batch, opts.jobs, attempt);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].record) ++successes;
      visited.push_back(ids_batch[i]);
      outcomes.push_back(std::move(got[i]));
    }
    next += batch;
  }
  return apply_outcomes(corpus, index, visited, outcomes);
}

// Breakdown -----------------------------------------------------------------

BreakdownKind parse_breakdown_kind(std::string_view s) {
  if (s == "typo") return BreakdownKind::typo;
  if (s == "disfluency") return BreakdownKind::disfluency;
  if (s == "asr") return BreakdownKind::asr;
  if (s == "paraphrase") return BreakdownKind::paraphrase;
  throw ParseError("unknown breakdown noise kind '" + std::string(s) + "'");
}

InjectionResult inject_breakdown_noise(const Corpus& corpus, const BreakdownNoiseParams& params,
                                       const InjectOptions& opts) {
  require_rate(opts);
  if (params.kind == BreakdownKind::paraphrase && !params.perturber)
    throw Error("paraphrase noise needs a perturber (file or service)");
  if (params.kind == BreakdownKind::asr && params.asr_confusions.empty())
    throw Error("asr noise needs a confusion table");

  auto ids = eligible_ids(corpus, [&](const Dialogue& d, std::size_t t) {
    const Turn& turn = d.turns[t];
    if (turn.speaker != Speaker::user || trim(turn.text).empty()) return false;
    switch (params.kind) {
      case BreakdownKind::typo: {
        std::size_t letters = 0;
        for (char c : turn.text) letters += has_ascii_letter(std::string_view(&c, 1));
        return letters >= 2;
      }
      case BreakdownKind::asr: return !text::asr_matches(turn.text, params.asr_confusions).empty();
      default: return true;
    }
  });
  const auto sel = select_units(std::move(ids), opts.rate, opts.seed);
  const auto index = index_turns(corpus);

  auto outcomes = run_parallel(sel.example_ids, opts.jobs, [&](const ExampleId& id) {
    const auto& loc = index.at(id);
    const Turn& turn = corpus.dialogues[loc.dialogue].turns[loc.turn];
    Rng rng = rng_for(opts, id, kBreakdownStream);
    switch (params.kind) {
      case BreakdownKind::typo:
        return text_outcome(turn, id, NoiseCategory::Id::PerturbationTypo, InjectAction::perturb,
                            *text::keyboard_typo(turn.text, params.keyboard_neighbors, rng), "typo");
      case BreakdownKind::disfluency: {
        text::Disfluency d{};
        std::string out = text::insert_disfluency(turn.text, rng, &d);
        static constexpr std::string_view kNames[] = {"umm", "uh", "repetition", "correction"};
        return text_outcome(turn, id, NoiseCategory::Id::PerturbationDisfluency, InjectAction::perturb,
                            std::move(out), std::string(kNames[static_cast<int>(d)]));
      }
      case BreakdownKind::asr: {
        const auto matches = text::asr_matches(turn.text, params.asr_confusions);
        const auto& m = rng.pick(matches);
        return text_outcome(turn, id, NoiseCategory::Id::PerturbationAsr, InjectAction::perturb,
                            text::apply_asr(turn.text, m),
                            turn.text.substr(m.start, m.length) + " -> " + m.replacement);
      }
      case BreakdownKind::paraphrase: {
        std::string out;
        try {
          out = params.perturber->perturb(id, turn.text);
        } catch (const IoError& e) {
          throw IoError("perturber failed on " + id.str() + ": " + e.what());
        } catch (const std::exception& e) {
          throw Error("perturber failed on " + id.str() + ": " + e.what());
        }
        return text_outcome(turn, id, NoiseCategory::Id::Paraphrase, InjectAction::perturb,
                            std::move(out), "paraphrase");
      }
    }
    return Outcome{};
  });
  return apply_outcomes(corpus, index, sel.example_ids, outcomes);
}

// Out-of-distribution splits ------------------------------------------------

std::set<std::string> observed_domains(const Corpus& corpus) {
  std::set<std::string> out;
  for (const auto& d : corpus.dialogues) out.insert(d.domains.begin(), d.domains.end());
  return out;
}

OodSplit make_ood_split(const Corpus& train_pool, const Corpus& test_pool,
                        const std::set<std::string>& heldout) {
  if (heldout.empty()) throw Error("heldout domain set is empty");
  const auto domains = observed_domains(train_pool);
  for (const auto& h : heldout)
    if (!domains.count(h)) throw Error("heldout domain '" + h + "' does not occur in the corpus");
  if (heldout.size() >= domains.size()) throw Error("heldout domains cover every domain");
  OodSplit split{heldout, train_pool, test_pool};
  split.train.dialogues.clear();
  for (const auto& d : train_pool.dialogues) {
    const bool hit = std::any_of(d.domains.begin(), d.domains.end(),
                                 [&](const std::string& x) { return heldout.count(x) > 0; });
    if (!hit) split.train.dialogues.push_back(d);
  }
  return split;
}

OodSplit make_ood_split(const Corpus& corpus, const std::set<std::string>& heldout) {
  return make_ood_split(corpus, corpus, heldout);
}

std::vector<OodSplit> leave_one_out_splits(const Corpus& train_pool, const Corpus& test_pool) {
  std::vector<OodSplit> out;
  for (const auto& d : observed_domains(train_pool))
    out.push_back(make_ood_split(train_pool, test_pool, {d}));
  return out;
}

// Category dispatch ---------------------------------------------------------

bool is_injectable(NoiseCategory c) {
  using Id = NoiseCategory::Id;
  switch (c.id()) {
    case Id::Class:
    case Id::ClassUniform:
    case Id::ClassStructured:
    case Id::Instance:
    case Id::InstanceOver:
    case Id::InstanceUnder:
    case Id::InstancePartial:
    case Id::AnnotatorAdversarial:
    case Id::AnnotatorFormatting:
    case Id::Ontology:
    case Id::OntologyDate:
    case Id::OntologyTime:
    case Id::OntologyLocation:
    case Id::OntologyNumber:
    case Id::DiscourseIncoherent:
    case Id::DiscourseDisfluent:
    case Id::DiscourseUnnatural:
    case Id::Paraphrase:
    case Id::ParaphraseSimplification:
    case Id::ParaphraseNonSequitur:
    case Id::ParaphraseVerbosity:
    case Id::PerturbationAsr:
    case Id::PerturbationTypo:
    case Id::PerturbationDisfluency:
      return true;
    default:
      return false;
  }
}

namespace {

LabelTarget default_target(const Corpus& corpus, const Json& params) {
  if (params.contains("target")) return parse_label_target(params.at("target").get<std::string>());
  return observed_labels(corpus, LabelTarget::class_labels).empty() ? LabelTarget::dialog_acts
                                                                    : LabelTarget::class_labels;
}

std::vector<std::string> phrases_param(const Json& params, const char* key,
                                       const std::vector<std::string>& fallback) {
  if (!params.contains(key)) return fallback;
  return params.at(key).get<std::vector<std::string>>();
}

void check_params(const Json& params, std::initializer_list<std::string_view> allowed) {
  if (!params.is_object()) throw SchemaError("noise params must be a JSON object");
  for (const auto& [key, value] : params.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError("unknown noise parameter '" + key + "' for this category");
}

}  // namespace

InjectionResult inject(const Corpus& corpus, const NoiseSpec& spec,
                       const InjectionResources& res, unsigned jobs) {
  using Id = NoiseCategory::Id;
  const InjectOptions opts{spec.rate, spec.seed, jobs};
  const Json& p = spec.params;
  if (!is_injectable(spec.category))
    throw Error("no injector for category " + spec.category.render());
  try {
    switch (spec.category.id()) {
      case Id::Class:
      case Id::ClassUniform:
      case Id::ClassStructured: {
        check_params(p, {"target"});
        ClassNoiseParams cp;
        cp.target = default_target(corpus, p);
        if (spec.category.id() == Id::ClassStructured) {
          cp.mode = ClassNoiseMode::structured;
          if (res.matrix) {
            cp.matrix = res.matrix;
          } else if (res.embeddings) {
            cp.matrix = build_transition_matrix(observed_labels(corpus, cp.target), *res.embeddings);
          } else {
            throw Error("structured class noise needs a transition matrix or an embedding table");
          }
        }
        return inject_class_noise(corpus, cp, opts);
      }
      case Id::Instance:
      case Id::InstanceOver:
      case Id::InstanceUnder:
      case Id::InstancePartial: {
        check_params(p, {"window_size"});
        InstanceNoiseParams ip;
        ip.window_size = p.value("window_size", std::size_t{3});
        if (spec.category.id() == Id::InstanceOver) ip.forced = InstanceKind::over;
        if (spec.category.id() == Id::InstanceUnder) ip.forced = InstanceKind::under;
        if (spec.category.id() == Id::InstancePartial) ip.forced = InstanceKind::partial;
        return inject_instance_noise(corpus, ip, opts);
      }
      case Id::AnnotatorAdversarial:
      case Id::AnnotatorFormatting: {
        check_params(p, {"kind", "target", "generic_phrases"});
        AnnotatorNoiseParams ap;
        ap.keyboard_neighbors = res.tables.keyboard_neighbors;
        ap.generic_phrases = phrases_param(p, "generic_phrases", res.tables.generic_phrases);
        if (spec.category.id() == Id::AnnotatorFormatting) {
          ap.kind = AnnotatorKind::formatting;
        } else if (p.contains("kind")) {
          ap.kind = parse_annotator_kind(p.at("kind").get<std::string>());
        } else {
          const bool has_labels = !observed_labels(corpus, LabelTarget::class_labels).empty() ||
                                  !observed_labels(corpus, LabelTarget::dialog_acts).empty();
          ap.kind = has_labels ? AnnotatorKind::spam_class : AnnotatorKind::spam_generation;
        }
        ap.target = default_target(corpus, p);
        return inject_annotator_noise(corpus, ap, opts);
      }
      case Id::Ontology:
      case Id::OntologyDate:
      case Id::OntologyTime:
      case Id::OntologyLocation:
      case Id::OntologyNumber: {
        check_params(p, {"kinds"});
        OntologyVariantParams op;
        op.tables = res.tables.variants;
        op.schema = res.schema;
        if (spec.category.id() == Id::Ontology) {
          if (p.contains("kinds"))
            for (const auto& k : p.at("kinds")) op.kinds.insert(k.get<std::string>());
        } else {
          op.kinds.insert(casefold(spec.category.segments().back()));
        }
        return inject_ontology_variants(corpus, op, opts);
      }
      case Id::DiscourseIncoherent:
      case Id::DiscourseDisfluent:
      case Id::DiscourseUnnatural: {
        check_params(p, {"speaker", "unnatural_phrases"});
        DiscourseNoiseParams dp;
        dp.kind = spec.category.id() == Id::DiscourseIncoherent ? DiscourseKind::incoherent
                  : spec.category.id() == Id::DiscourseDisfluent ? DiscourseKind::disfluent
                                                                  : DiscourseKind::unnatural;
        dp.unnatural_phrases = phrases_param(p, "unnatural_phrases", res.tables.unnatural_phrases);
        if (p.contains("speaker")) dp.speaker = parse_speaker(p.at("speaker").get<std::string>());
        return inject_discourse_noise(corpus, dp, opts);
      }
      default: {
        check_params(p, {});
        BreakdownNoiseParams bp;
        bp.asr_confusions = res.tables.asr_confusions;
        bp.keyboard_neighbors = res.tables.keyboard_neighbors;
        bp.perturber = res.perturber;
        switch (spec.category.id()) {
          case Id::PerturbationTypo: bp.kind = BreakdownKind::typo; break;
          case Id::PerturbationAsr: bp.kind = BreakdownKind::asr; break;
          case Id::PerturbationDisfluency: bp.kind = BreakdownKind::disfluency; break;
          default: bp.kind = BreakdownKind::paraphrase; break;
        }
        InjectionResult r = inject_breakdown_noise(corpus, bp, opts);
        // Paraphrase leaves are logged under the requested node.
        if (bp.kind == BreakdownKind::paraphrase)
          for (auto& rec : r.log) rec.category = spec.category;
        return r;
      }
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("noise params: ") + e.what());
  }
}

std::uint64_t sweep_seed(std::uint64_t base, double level) {
  return mix64(base ^ mix64(std::bit_cast<std::uint64_t>(level)));
}

std::vector<SweepPoint> sweep(const Corpus& corpus, const NoiseSpec& base,
                              const std::vector<double>& levels,
                              const InjectionResources& resources, unsigned jobs) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) throw Error("sweep levels must lie in [0, 1]");
    if (i > 0 && levels[i] < levels[i - 1]) throw Error("sweep levels must be sorted");
  }
  std::vector<SweepPoint> out;
  for (double level : levels) {
    if (level == 0.0) {
      out.push_back({level, InjectionResult{corpus, {}, {}}});
      continue;
    }
    NoiseSpec spec = base;
    spec.rate = level;
    spec.seed = sweep_seed(base.seed, level);
    out.push_back({level, inject(corpus, spec, resources, jobs)});
  }
  return out;
}

}  // namespace dialnoise
