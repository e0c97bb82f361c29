#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <sstream>

#include "dialnoise/data_tables.hpp"
#include "dialnoise/random.hpp"

namespace fixtures {

namespace {

struct SlotDef {
  std::string slot;
  std::vector<std::string> values;
  std::string phrase;  // "{}" is replaced by the value
};

const std::vector<std::string> kTimes = {"09:15", "10:30", "11:45", "12:00", "13:10", "14:15",
                                         "16:45", "17:30", "18:00", "19:15", "20:20", "21:40"};
const std::vector<std::string> kDays = {"monday", "tuesday", "wednesday", "thursday",
                                        "friday", "saturday", "sunday"};
const std::vector<std::string> kSmall = {"1", "2", "3", "4", "5", "6", "7", "8"};
const std::vector<std::string> kAreas = {"centre", "north", "south", "east", "west"};
const std::vector<std::string> kPlaces = {"pizza hut fenditton", "london kings cross", "cambridge",
                                          "stansted airport", "the junction", "ely", "peterborough"};

const std::map<std::string, std::vector<SlotDef>>& domain_slots() {
  static const std::map<std::string, std::vector<SlotDef>> d = {
      {"restaurant",
       {{"food", {"italian", "chinese", "indian", "british", "thai"}, "i want {} food"},
        {"area", kAreas, "somewhere in the {}"},
        {"pricerange", {"cheap", "moderate", "expensive"}, "something {} please"},
        {"book_people", kSmall, "a table for {} people"},
        {"book_day", kDays, "on {}"},
        {"book_time", kTimes, "at {}"}}},
      {"hotel",
       {{"area", kAreas, "a hotel in the {}"},
        {"stars", {"2", "3", "4", "5"}, "with {} stars"},
        {"type", {"hotel", "guesthouse"}, "it should be a {}"},
        {"book_stay", kSmall, "for {} nights"},
        {"book_people", kSmall, "for {} guests"},
        {"book_day", kDays, "starting {}"}}},
      {"taxi",
       {{"destination", kPlaces, "i need a taxi to {}"},
        {"departure", kPlaces, "picking me up from {}"},
        {"leaveat", kTimes, "leaving at {}"},
        {"arriveby", kTimes, "arriving by {}"}}},
      {"train",
       {{"departure", kPlaces, "a train from {}"},
        {"destination", kPlaces, "going to {}"},
        {"day", kDays, "on {}"},
        {"leaveat", kTimes, "after {}"},
        {"book_people", kSmall, "{} tickets"}}},
      {"attraction",
       {{"area", kAreas, "attractions in the {}"},
        {"type", {"museum", "park", "theatre", "college"}, "maybe a {}"},
        {"name", {"kings college", "the fitzwilliam museum", "cambridge arts theatre"}, "i mean {}"}}},
  };
  return d;
}

std::string fill(const std::string& phrase, const std::string& value) {
  std::string out = phrase;
  out.replace(out.find("{}"), 2, value);
  return out;
}

}  // namespace

Corpus dst_corpus(std::size_t dialogues, std::size_t turns_per_dialogue, std::uint64_t seed) {
  Corpus c;
  c.name = "synthetic-dst";
  c.task_kinds = {TaskKind::DST};
  Rng rng(seed);
  std::vector<std::string> names;
  for (const auto& [name, slots] : domain_slots()) names.push_back(name);
  for (std::size_t d = 0; d < dialogues; ++d) {
    Dialogue dlg;
    dlg.dialogue_id = "D" + std::to_string(d);
    std::vector<std::string> doms = {names[rng.below(names.size())]};
    if (rng.below(3) == 0) {
      std::string second = names[rng.below(names.size())];
      if (second != doms[0]) doms.push_back(second);
    }
    // Queue of (domain, slot def) in mention order.
    std::vector<std::pair<std::string, const SlotDef*>> queue;
    for (const auto& dom : doms)
      for (const auto& s : domain_slots().at(dom)) queue.push_back({dom, &s});
    std::vector<SlotValue> state;
    std::size_t next = 0;
    for (std::size_t t = 0; t < turns_per_dialogue; ++t) {
      Turn turn;
      turn.turn_id = static_cast<std::int64_t>(t);
      if (t % 2 == 0) {
        turn.speaker = Speaker::user;
        if (next < queue.size()) {
          const auto& [dom, def] = queue[next++];
          const std::string value = def->values[rng.below(def->values.size())];
          state.push_back({dom, def->slot, value});
          turn.text = fill(def->phrase, value);
        } else {
          turn.text = "that is all i need";
        }
        turn.labels.belief_state = state;
      } else {
        turn.speaker = Speaker::system;
        turn.text = "sure, anything else?";
        turn.labels.dialog_acts = {"reqmore"};
      }
      dlg.turns.push_back(std::move(turn));
    }
    std::sort(doms.begin(), doms.end());
    dlg.domains = doms;
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

Corpus class_corpus(std::size_t dialogues, std::size_t turns_per_dialogue,
                    const std::vector<std::string>& labels, std::uint64_t seed) {
  Corpus c;
  c.name = "synthetic-class";
  c.task_kinds = {TaskKind::TLC};
  Rng rng(seed);
  for (std::size_t d = 0; d < dialogues; ++d) {
    Dialogue dlg;
    dlg.dialogue_id = "C" + std::to_string(d);
    dlg.domains = {"general"};
    for (std::size_t t = 0; t < turns_per_dialogue; ++t) {
      Turn turn;
      turn.turn_id = static_cast<std::int64_t>(t);
      turn.speaker = t % 2 == 0 ? Speaker::user : Speaker::system;
      const std::string& label = labels[rng.below(labels.size())];
      turn.text = "utterance " + std::to_string(t) + " about " + label + " number " + std::to_string(d);
      turn.labels.class_labels = {label};
      dlg.turns.push_back(std::move(turn));
    }
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

Corpus taxi_dialogue() {
  Corpus c;
  c.name = "taxi";
  c.task_kinds = {TaskKind::DST};
  Dialogue d;
  d.dialogue_id = "SNG0129";
  d.domains = {"taxi"};
  Turn t0;
  t0.turn_id = 0;
  t0.speaker = Speaker::user;
  t0.text = "I need to book a taxi to pizza hut fenditton, leaving after 16:45.";
  t0.labels.belief_state = {{"taxi", "destination", "pizza hut fenditton"}, {"taxi", "leaveat", "16:45"}};
  Turn t1;
  t1.turn_id = 1;
  t1.speaker = Speaker::system;
  t1.text = "Where will you be departing from?";
  t1.labels.dialog_acts = {"taxi-request-depart"};
  Turn t2;
  t2.turn_id = 2;
  t2.speaker = Speaker::user;
  t2.text = "I'll be departing from the junction.";
  t2.labels.belief_state = {{"taxi", "destination", "pizza hut fenditton"},
                            {"taxi", "leaveat", "16:45"},
                            {"taxi", "departure", "the junction"}};
  d.turns = {t0, t1, t2};
  c.dialogues.push_back(d);
  return c;
}

std::shared_ptr<const OntologySchema> mwoz_schema() {
  static const auto schema =
      std::make_shared<const OntologySchema>(load_schema(data_dir() / "mwoz_schema.json"));
  return schema;
}

std::vector<PredictionRecord> oracle_dst_predictions(const Corpus& corpus, const std::string& predictor_id) {
  std::vector<PredictionRecord> out;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::user) continue;
      PredictionRecord r;
      r.example_id = {d.dialogue_id, t.turn_id};
      r.predictor_id = predictor_id;
      r.kind = PredictionKind::dst;
      for (const auto& sv : t.labels.belief_state) r.state.push_back({sv, 8.0});
      out.push_back(std::move(r));
    }
  return out;
}

std::vector<PredictionRecord> oracle_class_predictions(const Corpus& corpus, const std::string& predictor_id,
                                                       const std::vector<std::string>& labels) {
  std::vector<PredictionRecord> out;
  for (const auto& d : corpus.dialogues)
    for (const auto& t : d.turns) {
      if (t.labels.class_labels.empty()) continue;
      PredictionRecord r;
      r.example_id = {d.dialogue_id, t.turn_id};
      r.predictor_id = predictor_id;
      r.kind = PredictionKind::classification;
      for (const auto& l : labels) r.candidates.push_back({l, l == t.labels.class_labels.front() ? 6.0 : 0.0});
      out.push_back(std::move(r));
    }
  return out;
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto p = std::filesystem::temp_directory_path() /
           ("dialnoise_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
