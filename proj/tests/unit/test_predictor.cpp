#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "iclab/errors.hpp"
#include "iclab/predictor.hpp"
#include "test_support.hpp"

using namespace iclab;

namespace {

PredictorSpec subprocess_spec(std::string cmd, int timeout_ms = 5000) {
  PredictorSpec s;
  s.transport = Transport::subprocess;
  s.target = std::move(cmd);
  s.timeout = std::chrono::milliseconds(timeout_ms);
  return s;
}

}  // namespace

TEST_CASE("spec validation and target parsing") {
  PredictorSpec s;
  s.target = "http://localhost:1/x";
  CHECK_NOTHROW(s.validate());
  s.timeout = std::chrono::milliseconds(0);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.timeout = std::chrono::milliseconds(10);
  s.max_retries = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  CHECK(parse_predictor_target("https://api.example.com/v1/complete").transport == Transport::http_endpoint);
  const auto sub = parse_predictor_target("subprocess:python3 model.py");
  CHECK(sub.transport == Transport::subprocess);
  CHECK(sub.target == "python3 model.py");
  CHECK_THROWS_AS(parse_predictor_target("ftp://x"), ConfigError);
  CHECK_THROWS_AS(make_builtin_predictor("oracle"), ConfigError);
}

TEST_CASE("builtin predictors") {
  auto constant = make_builtin_predictor("constant:1");
  CHECK(constant->complete("anything") == "1");
  auto centroid = make_predictor(parse_predictor_target("builtin:centroid"));
  const std::string prompt =
      "preamble\n\nx: 1.0000, 0.0000 -> y: 1\nx: -1.0000, 0.0000 -> y: 0\nx: 0.5000, 0.2000 -> y:";
  CHECK(centroid->complete(prompt) == "1");
  CHECK(centroid->complete("x: 1.0000 -> y: 0\nx: 2.0000 -> y:") == "0");
  CHECK(centroid->complete("no examples") == "unknown");
}

TEST_CASE("subprocess predictor: one line per prompt with escaped newlines") {
  SubprocessPredictor p(subprocess_spec("while IFS= read -r line; do printf '%s\\n' \"$line\"; done"));
  CHECK(p.complete("hello") == "hello");
  CHECK(p.complete("two\nlines") == "two\\nlines");
  CHECK(p.complete("back\\slash") == "back\\\\slash");
  CHECK(p.complete("again") == "again");
}

TEST_CASE("subprocess predictor times out and restarts") {
  SubprocessPredictor slow(subprocess_spec("sleep 5", 200));
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(slow.complete("x"), TransportError);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));

  SubprocessPredictor dies(subprocess_spec("read line; echo first", 2000));
  CHECK(dies.complete("a") == "first");
  CHECK_THROWS_AS(dies.complete("b"), TransportError);
  CHECK(dies.complete("c") == "first");  // fresh child after the failure
}

TEST_CASE("HTTP predictor speaks the JSON contract") {
  httplib::Server server;
  std::string seen_auth;
  nlohmann::json seen_body;
  server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(nlohmann::json{{"text", " 1\n"}}.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("ICLAB_TEST_TOKEN", "s3cret", 1);
  PredictorSpec spec;
  spec.target = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
  spec.model_id = "test-model";
  spec.api_key_env = "ICLAB_TEST_TOKEN";
  spec.timeout = std::chrono::milliseconds(3000);
  HttpPredictor p(spec);
  CHECK(p.complete("prompt text") == " 1\n");
  CHECK(seen_auth == "Bearer s3cret");
  CHECK(seen_body.at("model") == "test-model");
  CHECK(seen_body.at("prompt") == "prompt text");
  CHECK(seen_body.at("max_tokens") == 8);

  spec.target = "http://127.0.0.1:" + std::to_string(port) + "/broken";
  CHECK_THROWS_AS(HttpPredictor(spec).complete("x"), TransportError);
  spec.target = "http://127.0.0.1:" + std::to_string(port) + "/garbage";
  CHECK_THROWS_AS(HttpPredictor(spec).complete("x"), TransportError);

  server.stop();
  th.join();
  spec.target = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
  CHECK_THROWS_AS(HttpPredictor(spec).complete("x"), TransportError);
}

TEST_CASE("response cache and cached predictor") {
  testing::TempDir dir;
  ResponseCache cache(dir.path());
  CHECK_FALSE(cache.lookup("m", "p").has_value());
  cache.store("m", "p", "1");
  CHECK(cache.lookup("m", "p") == "1");
  CHECK_FALSE(cache.lookup("other", "p").has_value());
  CHECK(ResponseCache::prompt_hash("p").size() == 32);
  CHECK(cache.entry_path("m/../x", "p").parent_path().filename() == "m_.._x");

  int calls = 0;
  auto backend = std::make_shared<FunctionPredictor>("fn", [&](const std::string& s) {
    ++calls;
    return s.size() % 2 ? "1" : "0";
  });
  CachedPredictor cached(backend, dir.path());
  CHECK(cached.model_id() == "fn");
  CHECK(cached.complete("abc") == "1");
  CHECK(cached.complete("abc") == "1");
  CHECK(calls == 1);
  CHECK(cached.hits() == 1);
  CHECK(cached.backend_calls() == 1);

  CachedPredictor replay(nullptr, dir.path(), "fn");
  CHECK(replay.complete("abc") == "1");
  CHECK_THROWS_AS(replay.complete("never seen"), TransportError);
  CHECK_THROWS_AS(CachedPredictor(nullptr, dir.path()), ConfigError);
}
