#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "dialnoise/error.hpp"
#include "dialnoise/predictions.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace dialnoise;

namespace {

// Local prediction service on an ephemeral port.
class TestServer {
 public:
  explicit TestServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/predict", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ServiceOptions options(const std::string& url, int timeout_ms = 2000, unsigned retries = 2) {
  return {url, std::chrono::milliseconds(timeout_ms), retries};
}

PredictionRecord class_record() {
  PredictionRecord r;
  r.example_id = {"D1", 2};
  r.predictor_id = "bert-a";
  r.kind = PredictionKind::classification;
  r.candidates = {{"inform", 2.0}, {"request", -1.0}, {"book", 0.5}};
  return r;
}

PredictionRecord dst_record() {
  PredictionRecord r;
  r.example_id = {"D1", 0};
  r.predictor_id = "trade-b";
  r.kind = PredictionKind::dst;
  r.state = {{{"taxi", "leaveat", "16:45"}, 3.0},
             {{"taxi", "leaveat", "17:45"}, 1.0},
             {{"taxi", "destination", "ely"}, -2.0}};
  return r;
}

}  // namespace

TEST(PredictionJson, ExactFieldNames) {
  const auto j = to_json(class_record());
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"example_id", "predictor_id", "kind", "candidates"}));
  EXPECT_EQ(j["candidates"][0].dump(), R"({"label":"inform","logit":2.0})");
  const auto d = to_json(dst_record());
  EXPECT_EQ(d["state"][0].dump(), R"({"domain":"taxi","slot":"leaveat","value":"16:45","score":3.0})");
  EXPECT_EQ(prediction_from_json(j), class_record());
  EXPECT_EQ(prediction_from_json(d), dst_record());
}

TEST(PredictionJson, StrictValidation) {
  const std::vector<std::string> bad = {
      R"([])",
      R"({"predictor_id": "a", "kind": "dst", "state": []})",
      R"({"example_id": "nocolon", "predictor_id": "a", "kind": "dst", "state": []})",
      R"({"example_id": "D:1", "predictor_id": "", "kind": "dst", "state": []})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "regression", "state": []})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "classification", "candidates": []})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "classification", "candidates": [{"label": "x", "logit": "high"}]})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "classification", "candidates": [{"label": "x", "logit": 1}, {"label": "x", "logit": 2}]})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "classification", "candidates": [{"label": "x", "logit": 1}], "state": []})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "dst", "state": [{"domain": "t", "slot": "s", "score": 1}]})",
      R"({"example_id": "D:1", "predictor_id": "a", "kind": "dst", "state": [], "candidates": []})",
  };
  for (const auto& s : bad) EXPECT_THROW(prediction_from_json(Json::parse(s)), SchemaError) << s;
}

TEST(PredictionJson, JsonlFilesWithLineNumbers) {
  const auto dir = fixtures::temp_dir("pred");
  const std::vector<PredictionRecord> records = {class_record(), dst_record()};
  save_predictions(records, dir / "p.jsonl");
  EXPECT_EQ(load_predictions(dir / "p.jsonl"), records);
  try {
    parse_predictions(dump_predictions(records) + "\n{\"example_id\": 3}\n", "x.jsonl");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_predictions("{not json", "y"), ParseError);
  EXPECT_THROW(load_predictions(dir / "missing.jsonl"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(PredictionValues, ArgmaxAndImplicitNone) {
  EXPECT_EQ(predicted_label(class_record()), "inform");
  // destination's only value scores below the implicit 0 option.
  EXPECT_EQ(predicted_state(dst_record()), (std::vector<SlotValue>{{"taxi", "leaveat", "16:45"}}));
  EXPECT_THROW(predicted_label(dst_record()), Error);
  EXPECT_THROW(predicted_state(class_record()), Error);
}

TEST(PredictionValues, ConfidenceOracle) {
  const double t = 1.5;
  const double z = std::exp(2.0 / t) + std::exp(-1.0 / t) + std::exp(0.5 / t);
  EXPECT_NEAR(prediction_confidence(class_record(), t), std::exp(2.0 / t) / z, 1e-12);
  // leaveat: options (16:45, 17:45, none) = (3, 1, 0); destination: (ely, none) = (-2, 0).
  const double leave = std::exp(3.0 / t) / (std::exp(3.0 / t) + std::exp(1.0 / t) + 1.0);
  const double dest = 1.0 / (std::exp(-2.0 / t) + 1.0);
  EXPECT_NEAR(prediction_confidence(dst_record(), t), std::min(leave, dest), 1e-12);
  PredictionRecord empty = dst_record();
  empty.state.clear();
  EXPECT_EQ(prediction_confidence(empty, 1.0), 1.0);
  EXPECT_THROW(prediction_confidence(class_record(), 0.0), Error);
}

TEST(Service, PredictRoundTrip) {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = Json::parse(req.body);
    PredictionRecord r;
    r.example_id = ExampleId::parse(body.at("example_id").get<std::string>());
    r.predictor_id = "svc";
    r.kind = PredictionKind::classification;
    r.candidates = {{body.at("context").at("text").get<std::string>(), 1.0}};
    res.set_content(to_json(r).dump(), "application/json");
  });
  const auto corpus = fixtures::class_corpus(3, 4, {"a", "b"}, 1);
  PredictionClient client(options(server.url()));
  const auto ids = all_turn_ids(corpus);
  const auto preds = client.predict_all(corpus, ids, 4);
  ASSERT_EQ(preds.size(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    EXPECT_EQ(preds[i].example_id, ids[i]);
    EXPECT_EQ(preds[i].candidates[0].first, find_turn(corpus, ids[i])->text);
  }
  EXPECT_EQ(calls.load(), static_cast<int>(ids.size()));
}

TEST(Service, RetriesServerErrors) {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(to_json(class_record()).dump(), "application/json");
  });
  PredictionClient client(options(server.url(), 2000, 2));
  const auto r = client.predict({"D1", 2}, Turn{});
  EXPECT_EQ(r, class_record());
  EXPECT_EQ(calls.load(), 3);

  calls = -10;
  PredictionClient impatient(options(server.url(), 2000, 1));
  EXPECT_THROW(impatient.predict({"D1", 2}, Turn{}), IoError);
  EXPECT_EQ(calls.load(), -8);
}

TEST(Service, ClientErrorsAndMismatchedIds) {
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = Json::parse(req.body);
    if (body.at("example_id") == "D1:9") {
      res.status = 400;
      res.set_content("bad request", "text/plain");
      return;
    }
    if (body.at("example_id") == "D1:8") {
      res.set_content("not json", "text/plain");
      return;
    }
    res.set_content(to_json(class_record()).dump(), "application/json");
  });
  PredictionClient client(options(server.url()));
  EXPECT_THROW(client.predict({"D1", 9}, Turn{}), Error);
  EXPECT_THROW(client.predict({"D1", 8}, Turn{}), SchemaError);
  EXPECT_THROW(client.predict({"D1", 7}, Turn{}), SchemaError);
}

TEST(Service, TimeoutBecomesIoError) {
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(to_json(class_record()).dump(), "application/json");
  });
  PredictionClient client(options(server.url(), 150, 0));
  EXPECT_THROW(client.predict({"D1", 2}, Turn{}), IoError);
}

TEST(Service, UnreachableHost) {
  // Grab a free port, then close it so nothing listens there.
  std::string url;
  {
    TestServer server([](const httplib::Request&, httplib::Response&) {});
    url = server.url();
  }
  PredictionClient client(options(url, 300, 1));
  EXPECT_THROW(client.predict({"D1", 2}, Turn{}), IoError);
}

TEST(Perturbers, FileAndHttp) {
  const auto dir = fixtures::temp_dir("para");
  {
    std::ofstream out(dir / "para.jsonl");
    out << R"({"example_id": "D0:0", "text": "could you find me a cab"})" << "\n\n";
  }
  FilePerturber file(dir / "para.jsonl");
  EXPECT_EQ(file.perturb({"D0", 0}, "ignored"), "could you find me a cab");
  EXPECT_THROW(file.perturb({"D0", 1}, "x"), Error);
  EXPECT_THROW(FilePerturber(dir / "none.jsonl"), IoError);
  {
    std::ofstream out(dir / "bad.jsonl");
    out << "{oops\n";
  }
  EXPECT_THROW(FilePerturber(dir / "bad.jsonl"), ParseError);

  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = Json::parse(req.body);
    Json reply = Json::object();
    if (body.at("example_id") != "D0:5") reply["text"] = "so, " + body.at("text").get<std::string>();
    res.set_content(reply.dump(), "application/json");
  });
  HttpPerturber http(options(server.url()));
  EXPECT_EQ(http.perturb({"D0", 0}, "book it"), "so, book it");
  EXPECT_THROW(http.perturb({"D0", 5}, "book it"), SchemaError);
  std::filesystem::remove_all(dir);
}
