#include <gtest/gtest.h>

#include <fstream>

#include "dialnoise/corpus.hpp"
#include "dialnoise/error.hpp"
#include "fixtures.hpp"

using namespace dialnoise;

namespace {

const char* kSmall = R"({
  "name": "toy",
  "task_kinds": ["DST"],
  "dialogues": [
    {
      "dialogue_id": "d1",
      "domains": ["restaurant"],
      "turns": [
        {
          "turn_id": 0,
          "speaker": "user",
          "text": "book an italian place",
          "labels": {
            "class_labels": [],
            "dialog_acts": ["inform"],
            "belief_state": [{"domain": "restaurant", "slot": "food", "value": "italian"}],
            "spans": [{"label": "food", "start": 8, "end": 15}],
            "reference_response": null
          }
        }
      ]
    }
  ]
}
)";

}  // namespace

TEST(CorpusJson, RoundTripIsByteIdentical) {
  const Corpus c = fixtures::dst_corpus(20, 6, 3);
  const std::string once = dump_corpus(c);
  const std::string twice = dump_corpus(parse_corpus(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(parse_corpus(once), c);
}

TEST(CorpusJson, KeysFollowTheCanonicalOrder) {
  const std::string text = dump_corpus(parse_corpus(kSmall));
  auto pos = [&](const char* key) { return text.find(std::string("\"") + key + "\""); };
  EXPECT_LT(pos("name"), pos("task_kinds"));
  EXPECT_LT(pos("task_kinds"), pos("dialogues"));
  EXPECT_LT(pos("dialogue_id"), pos("domains"));
  EXPECT_LT(pos("turn_id"), pos("speaker"));
  EXPECT_LT(pos("speaker"), pos("text"));
  EXPECT_LT(pos("class_labels"), pos("dialog_acts"));
  EXPECT_LT(pos("belief_state"), pos("spans"));
  EXPECT_LT(pos("spans"), pos("reference_response"));
}

TEST(CorpusJson, ParsesFields) {
  const Corpus c = parse_corpus(kSmall);
  ASSERT_EQ(c.dialogues.size(), 1u);
  const Turn& t = c.dialogues[0].turns[0];
  EXPECT_EQ(t.text.substr(8, 7), "italian");
  EXPECT_EQ(t.labels.spans[0].label, "food");
  EXPECT_EQ(t.labels.belief_state[0], (SlotValue{"restaurant", "food", "italian"}));
  EXPECT_FALSE(t.labels.reference_response.has_value());
  EXPECT_EQ(c.task_kinds, std::vector<TaskKind>{TaskKind::DST});
}

TEST(CorpusJson, ErrorsCarryLocation) {
  try {
    parse_corpus("{\"name\": \"x\", \n \"dialogues\": [}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::string bad = kSmall;
  bad.replace(bad.find("\"speaker\": \"user\""), 17, "\"speaker\": \"robot\"");
  EXPECT_THROW(parse_corpus(bad), SchemaError);
}

TEST(CorpusJson, InvalidUtf8IsRejected) {
  std::string bad = kSmall;
  bad.replace(bad.find("italian place"), 7, "ital\xff\xfe");
  EXPECT_THROW(parse_corpus(bad), Error);
}

TEST(CorpusFiles, MissingFileIsIoError) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.json"), IoError);
}

TEST(CorpusFiles, SaveThenLoad) {
  const auto dir = fixtures::temp_dir("corpus");
  const Corpus c = fixtures::dst_corpus(5, 4, 1);
  save_corpus(c, dir / "c.json");
  EXPECT_EQ(load_corpus(dir / "c.json"), c);
  EXPECT_EQ(fixtures::read_file(dir / "c.json"), dump_corpus(c));
}

TEST(Validation, CleanFixtureHasNoViolations) {
  EXPECT_TRUE(validate_corpus(fixtures::dst_corpus(30, 8, 2)).empty());
  EXPECT_TRUE(validate_corpus(fixtures::taxi_dialogue()).empty());
}

TEST(Validation, EachRuleFires) {
  Corpus c = fixtures::dst_corpus(3, 4, 2);
  c.dialogues[1].dialogue_id = c.dialogues[0].dialogue_id;         // duplicate_dialogue_id
  c.dialogues[0].turns[2].turn_id = 0;                              // turn_id_order
  c.dialogues[2].turns[1].text = "";                                // empty_text (acts present, allowed)
  c.dialogues[2].turns[1].labels.dialog_acts.clear();               // now empty_text
  c.dialogues[2].turns[0].labels.spans = {{"x", 3, 999}};           // span_bounds
  c.dialogues[2].turns[2].labels.belief_state.push_back(c.dialogues[2].turns[2].labels.belief_state[0]);  // duplicate_slot
  c.dialogues[2].turns[2].labels.belief_state.push_back({"", "food", "x"});  // empty_slot_field
  std::multiset<std::string> rules;
  for (const auto& v : validate_corpus(c)) rules.insert(v.rule);
  EXPECT_EQ(rules, (std::multiset<std::string>{"duplicate_dialogue_id", "turn_id_order", "empty_text",
                                                "span_bounds", "duplicate_slot", "empty_slot_field"}));
}

TEST(Validation, ActionOnlyTurnsAreAllowed) {
  Corpus c = fixtures::dst_corpus(1, 2, 2);
  c.dialogues[0].turns[1].text = "";
  EXPECT_TRUE(validate_corpus(c).empty());
}

TEST(Validation, LoadRejectsInvalidCorpus) {
  const auto dir = fixtures::temp_dir("invalid");
  Corpus c = fixtures::dst_corpus(2, 2, 2);
  c.dialogues[1].dialogue_id = c.dialogues[0].dialogue_id;
  {
    std::ofstream out(dir / "c.json");
    out << dump_corpus(c);
  }
  EXPECT_THROW(load_corpus(dir / "c.json"), SchemaError);
}

TEST(ExampleIdTest, RendersAndParses) {
  EXPECT_EQ((ExampleId{"MUL0001.json", 4}).str(), "MUL0001.json:4");
  const ExampleId id = ExampleId::parse("a:b:12");
  EXPECT_EQ(id.dialogue_id, "a:b");
  EXPECT_EQ(id.turn_id, 12);
  EXPECT_THROW(ExampleId::parse("nocolon"), ParseError);
  EXPECT_THROW(ExampleId::parse("d:x1"), ParseError);
}

TEST(SampleExamples, TurnAndDialogueUnits) {
  const Corpus c = fixtures::dst_corpus(40, 5, 4);
  const Selection turns = sample_examples(c, 0.1, 7, SampleUnit::turn);
  EXPECT_EQ(turns.example_ids.size(), 20u);
  const Selection dialogues = sample_examples(c, 0.1, 7, SampleUnit::dialogue);
  EXPECT_EQ(dialogues.example_ids.size(), 4u);
  for (const auto& id : dialogues.example_ids) EXPECT_EQ(id.turn_id, -1);
}

TEST(Stats, CountsMatchDirectTally) {
  const Corpus c = fixtures::dst_corpus(25, 7, 9);
  const StatsReport r = corpus_stats(c);
  std::size_t turns = 0, users = 0, slots = 0;
  std::map<std::string, std::size_t> doms;
  for (const auto& d : c.dialogues) {
    for (const auto& x : d.domains) ++doms[x];
    for (const auto& t : d.turns) {
      ++turns;
      users += t.speaker == Speaker::user;
      slots += t.labels.belief_state.size();
    }
  }
  EXPECT_EQ(r.dialogue_count, 25u);
  EXPECT_EQ(r.turn_count, turns);
  EXPECT_EQ(r.user_turns, users);
  EXPECT_EQ(r.system_turns, turns - users);
  EXPECT_EQ(r.label_counts.at("belief_state"), slots);
  EXPECT_EQ(r.domain_counts, doms);
  EXPECT_FALSE(render_stats(r).empty());
}

TEST(Casefold, TrimsAndLowers) {
  EXPECT_EQ(casefold("  Pizza Hut \t"), "pizza hut");
  EXPECT_EQ(trim("\n x y \n"), "x y");
}

TEST(MultiWoz, ImportsUserStatesFromNextSystemMetadata) {
  const Json data = Json::parse(R"({
    "SNG01.json": {
      "goal": {},
      "log": [
        {"text": "I want a cheap place in the centre", "metadata": {}, "dialog_act": {"Restaurant-Inform": [["Price", "cheap"]]}},
        {"text": "Which food?", "metadata": {
          "restaurant": {"book": {"booked": [], "people": "", "time": "not mentioned"},
                         "semi": {"food": "not mentioned", "pricerange": "cheap", "area": "centre"}},
          "taxi": {"book": {"booked": []}, "semi": {"destination": ""}}},
         "dialog_act": {"Restaurant-Request": [["Food", "?"]]}},
        {"text": "Italian, for 2 people", "metadata": {}},
        {"text": "Booked.", "metadata": {
          "restaurant": {"book": {"booked": [], "people": "2"},
                         "semi": {"food": "italian", "pricerange": "cheap", "area": "centre"}}}}
      ]
    }
  })");
  const Corpus c = import_multiwoz(data);
  ASSERT_EQ(c.dialogues.size(), 1u);
  const auto& d = c.dialogues[0];
  EXPECT_EQ(d.domains, std::vector<std::string>{"restaurant"});
  ASSERT_EQ(d.turns.size(), 4u);
  EXPECT_EQ(d.turns[0].speaker, Speaker::user);
  EXPECT_EQ(d.turns[0].labels.belief_state,
            (std::vector<SlotValue>{{"restaurant", "area", "centre"}, {"restaurant", "pricerange", "cheap"}}));
  EXPECT_EQ(d.turns[0].labels.dialog_acts, std::vector<std::string>{"restaurant-inform"});
  EXPECT_EQ(d.turns[2].labels.belief_state.size(), 4u);
  EXPECT_TRUE(d.turns[1].labels.belief_state.empty());
  EXPECT_TRUE(validate_corpus(c).empty());
}
