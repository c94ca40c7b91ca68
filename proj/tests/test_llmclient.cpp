#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "cnorm/error.hpp"
#include "cnorm/llmclient.hpp"

using namespace cnorm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const LabelLexicons kLex = {{"solar_eclipse", {"sun", "moon", "earth"}}, {"circuit", {"battery", "bulb", "wire"}},
                            {"boiling", {"steam", "pot", "bubbles"}}};

class ImageDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cnorm_llm_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  ImageJob job(const std::string& name) {
    const auto path = (dir_ / (name + ".png")).string();
    std::ofstream(path, std::ios::binary) << "\x89PNG fake bytes for " << name;
    return {name, "theme", path};
  }

  fs::path dir_;
};

// Counts concurrent calls and sleeps briefly so overlaps are observable.
class CountingTransport : public Transport {
 public:
  std::string send(const std::string&, const json&) override {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    ++calls;
    return "a battery and a bulb";
  }
  std::atomic<int> in_flight{0}, peak{0}, calls{0};
};

}  // namespace

TEST(DeriveLabel, LexiconMatch) {
  EXPECT_EQ(derive_label("three circles: sun, moon, earth aligned", kLex), "solar_eclipse");
  EXPECT_EQ(derive_label("A drawing of a house with a tree", kLex), kUnrecognizedLabel);
  EXPECT_EQ(derive_label("", kLex), kUnrecognizedLabel);
  EXPECT_EQ(derive_label("Steam over a POT, a bulb", kLex), "boiling");
}

TEST(RequestBody, FillsTemplate) {
  EndpointConfig cfg;
  cfg.model_name = "m1";
  const auto body = build_request_body(cfg, kRecognitionPrompt, "data:image/png;base64,AAAA");
  const auto dumped = body.dump();
  EXPECT_NE(dumped.find("\"m1\""), std::string::npos);
  EXPECT_NE(dumped.find(kRecognitionPrompt), std::string::npos);
  EXPECT_NE(dumped.find("data:image/png;base64,AAAA"), std::string::npos);
  EXPECT_EQ(dumped.find("{{"), std::string::npos);
}

TEST(EndpointConfigJson, RoundTripWithoutSecrets) {
  auto cfg = EndpointConfig::from_json({{"base_url", "https://example.org/v1"}, {"max_concurrent_requests", 2}});
  EXPECT_EQ(cfg.max_concurrent_requests, 2);
  ::setenv(cfg.api_key_env.c_str(), "sk-very-secret", 1);
  const auto j = cfg.to_json().dump();
  EXPECT_EQ(j.find("sk-very-secret"), std::string::npos);
  EXPECT_EQ(EndpointConfig::from_json(cfg.to_json()).base_url, "https://example.org/v1");
  ::unsetenv(cfg.api_key_env.c_str());
}

TEST_F(ImageDir, AgreementTakesTwoCalls) {
  auto j = job("img1");
  auto stub = std::make_shared<StubTransport>(std::map<std::string, std::vector<std::string>>{
      {j.image_path, {"the sun and the moon", "moon covers the sun", "unused"}}});
  RecognitionClient client({}, stub, kLex);
  const auto out = client.run_protocol(j);
  EXPECT_EQ(stub->calls(), 2u);
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(out.records[0].pass_index, 1);
  EXPECT_EQ(out.records[1].pass_index, 2);
  EXPECT_EQ(out.resolved->final_label, std::optional<std::string>("solar_eclipse"));
  EXPECT_EQ(out.resolved->reasoning_text, "the sun and the moon");
}

TEST_F(ImageDir, DisagreementTakesThreeCallsAndMajority) {
  auto j = job("img2");
  auto stub = std::make_shared<StubTransport>(std::map<std::string, std::vector<std::string>>{
      {j.image_path, {"sun moon earth", "a battery and bulb", "the earth in the moon shadow"}}});
  RecognitionClient client({}, stub, kLex);
  const auto out = client.run_protocol(j);
  EXPECT_EQ(stub->calls(), 3u);
  EXPECT_EQ(out.resolved->final_label, std::optional<std::string>("solar_eclipse"));
  EXPECT_FALSE(out.resolved->excluded);
}

TEST_F(ImageDir, ThreeWayDisagreementExcluded) {
  auto j = job("img3");
  auto stub = std::make_shared<StubTransport>(std::map<std::string, std::vector<std::string>>{
      {j.image_path, {"sun moon earth", "a battery and bulb", "steam from a pot"}}});
  RecognitionClient client({}, stub, kLex);
  const auto out = client.run_protocol(j);
  EXPECT_EQ(stub->calls(), 3u);
  EXPECT_TRUE(out.resolved->excluded);
  EXPECT_EQ(out.resolved->exclusion_reason, ExclusionReason::three_way_disagreement);
}

TEST_F(ImageDir, RequestsAreStatelessAndTranscriptHasNoImageOrKey) {
  ::setenv("CNORM_API_KEY", "sk-should-not-leak", 1);
  auto j = job("img4");
  auto stub = std::make_shared<StubTransport>(std::map<std::string, std::vector<std::string>>{
      {j.image_path, {"UNIQUE_REPLY_ONE sun", "UNIQUE_REPLY_TWO bulb", "UNIQUE_REPLY_THREE moon"}}});
  RecognitionClient client({}, stub, kLex);
  client.run_protocol(j);
  const auto t = client.transcript();
  ASSERT_EQ(t.size(), 3u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto req = t[i].at("request").dump();
    EXPECT_EQ(req.find("UNIQUE_REPLY"), std::string::npos) << "request " << i << " carries an earlier reply";
    EXPECT_EQ(req, t[0].at("request").dump());
    EXPECT_NE(req.find("sha256:"), std::string::npos);
    EXPECT_EQ(req.find("base64"), std::string::npos);
    EXPECT_EQ(t[i].dump().find("sk-should-not-leak"), std::string::npos);
    EXPECT_EQ(t[i].at("pass_index"), static_cast<int>(i) + 1);
  }
  ::unsetenv("CNORM_API_KEY");
}

TEST_F(ImageDir, ErrorsSurface) {
  auto j = job("img5");
  auto stub = std::make_shared<StubTransport>(
      std::map<std::string, std::vector<std::string>>{{j.image_path, {"   ", "sun"}}});
  RecognitionClient client({}, stub, kLex);
  try {
    client.recognize(j, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_response");
  }
  auto missing = job("img6");
  try {
    client.recognize(missing, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "transport_failure");
  }
  const auto batch = client.run_batch({missing});
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_FALSE(batch[0].error.empty());
  EXPECT_FALSE(batch[0].resolved.has_value());
}

TEST_F(ImageDir, BatchRespectsConcurrencyBound) {
  std::vector<ImageJob> jobs;
  for (int i = 0; i < 12; ++i) jobs.push_back(job("b" + std::to_string(i)));
  for (int bound : {1, 3}) {
    auto transport = std::make_shared<CountingTransport>();
    EndpointConfig cfg;
    cfg.max_concurrent_requests = bound;
    RecognitionClient client(cfg, transport, kLex);
    const auto out = client.run_batch(jobs);
    ASSERT_EQ(out.size(), jobs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].resolved->item_id, jobs[i].item_id);
      EXPECT_EQ(out[i].records.size(), 2u);
    }
    EXPECT_EQ(transport->calls.load(), 24);
    EXPECT_LE(transport->peak.load(), bound);
  }
}

TEST_F(ImageDir, StubLoadsFromFile) {
  auto j = job("img7");
  const auto path = (dir_ / "stub.json").string();
  std::ofstream(path) << json{{j.image_path, {"sun", "moon"}}}.dump();
  auto stub = StubTransport::load(path);
  RecognitionClient client({}, stub, kLex);
  EXPECT_EQ(client.run_protocol(j).resolved->final_label, std::optional<std::string>("solar_eclipse"));
}

TEST_F(ImageDir, HttpTransportRetriesAndSendsKey) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(R"({"choices":[{"message":{"content":"a bulb and a battery"}}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("CNORM_TEST_KEY", "sk-live", 1);
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.api_key_env = "CNORM_TEST_KEY";
  cfg.timeout_seconds = 5;
  RecognitionClient client(cfg, std::make_shared<HttpTransport>(cfg), kLex);
  auto j = job("live");
  const auto rec = client.recognize(j, 1);
  server.stop();
  th.join();
  ::unsetenv("CNORM_TEST_KEY");

  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(rec.label, "circuit");
  EXPECT_EQ(seen_auth, "Bearer sk-live");
  EXPECT_NE(seen_body.find("data:image/png;base64,"), std::string::npos);
  EXPECT_EQ(client.transcript()[0].dump().find("sk-live"), std::string::npos);
}
