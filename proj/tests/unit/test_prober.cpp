#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>

#include "iclab/errors.hpp"
#include "iclab/prober.hpp"
#include "iclab/prompt.hpp"
#include "test_support.hpp"

using namespace iclab;

namespace {

TaskBatch probe_batch(std::size_t b = 15, double eps = 0.0) {
  auto c = testing::small_config(3, 5, b);
  c.signal = SignalRegime::constant(6.45);
  c.noise = {eps, NoiseScope::context_only};
  return sample_task_batch(c, BatchRole::validation, 0);
}

// Answers every prompt of the batch with its expected label.
std::shared_ptr<FunctionPredictor> oracle_for(const TaskBatch& batch) {
  auto answers = std::make_shared<std::map<std::string, std::string>>();
  for (const auto& t : batch.tasks) {
    const auto q = build_classification_prompt(t);
    (*answers)[q.text()] = std::to_string(q.expected_label);
    for (std::size_t i = 0; i < t.context_size(); ++i) {
      const auto p = build_classification_prompt(t, i);
      (*answers)[p.text()] = std::to_string(p.expected_label);
    }
  }
  return std::make_shared<FunctionPredictor>("oracle", [answers](const std::string& prompt) {
    const auto it = answers->find(prompt);
    return it == answers->end() ? std::string("?") : it->second;
  });
}

}  // namespace

TEST_CASE("perfect oracle scores 1 on both metrics") {
  const auto batch = probe_batch(15, 0.3);
  auto oracle = oracle_for(batch);
  ProbeOptions opts;
  opts.include_loo = true;
  const auto m = evaluate_llm_batch(*oracle, batch, opts);
  CHECK(m.query_accuracy == 1.0);
  CHECK(m.icl_loo_accuracy == 1.0);
  CHECK(m.parse_failure_rate == 0.0);
  CHECK(m.n_tasks == 15);
  CHECK(m.query_requests == 15);
  CHECK(m.loo_requests == 15 * 5);
}

TEST_CASE("always-1 predictor scores the fraction of positive clean labels") {
  const auto batch = probe_batch(40);
  auto ones = make_builtin_predictor("constant:1");
  const auto m = evaluate_llm_batch(*ones, batch);
  double positives = 0;
  for (const auto& t : batch.tasks) positives += t.query_y_clean > 0;
  CHECK(m.query_accuracy == doctest::Approx(positives / 40));
  CHECK(m.loo_requests == 0);
  CHECK(m.icl_loo_accuracy == 0.0);
}

TEST_CASE("unparseable answers count as failures, not as wrong labels") {
  const auto batch = probe_batch(10);
  FunctionPredictor chatty("chatty", [](const std::string&) { return std::string("I think it is 1"); });
  const auto m = evaluate_llm_batch(chatty, batch);
  CHECK(m.parse_failures == 10);
  CHECK(m.query_parsed == 0);
  CHECK(m.parse_failure_rate == 1.0);
  CHECK(m.query_accuracy == 0.0);
}

TEST_CASE("transport exhaustion excludes the task from accuracy") {
  const auto batch = probe_batch(8);
  auto oracle = oracle_for(batch);
  std::atomic<int> n{0};
  // Every other prompt fails permanently.
  std::mutex mu;
  std::map<std::string, bool> dead;
  for (std::size_t i = 0; i < batch.size(); i += 2) dead[build_classification_prompt(batch.tasks[i]).text()] = true;
  FunctionPredictor flaky("flaky", [&](const std::string& p) -> std::string {
    ++n;
    {
      std::lock_guard lock(mu);
      if (dead.contains(p)) throw TransportError("down");
    }
    return oracle->complete(p);
  });
  ProbeOptions opts;
  opts.max_retries = 2;
  opts.initial_backoff = std::chrono::milliseconds(1);
  const auto m = evaluate_llm_batch(flaky, batch, opts);
  CHECK(m.transport_failures == 4);
  CHECK(m.query_parsed == 4);
  CHECK(m.query_accuracy == 1.0);
  CHECK(m.parse_failure_rate == doctest::Approx(0.5));
  CHECK(n == 4 * 3 + 4);
}

TEST_CASE("retry with exponential backoff recovers from transient errors") {
  int calls = 0;
  FunctionPredictor transient("t", [&](const std::string&) -> std::string {
    if (++calls < 3) throw TransportError("busy");
    return "1";
  });
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(complete_with_retry(transient, "p", 3, std::chrono::milliseconds(20)) == "1");
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(60));  // 20 + 40
  calls = 0;
  CHECK_FALSE(complete_with_retry(transient, "p", 1, std::chrono::milliseconds(1)).has_value());
}

TEST_CASE("results do not depend on concurrency") {
  const auto batch = probe_batch(12);
  auto centroid = make_builtin_predictor("centroid");
  ProbeOptions serial;
  serial.include_loo = true;
  serial.concurrency = 1;
  ProbeOptions parallel = serial;
  parallel.concurrency = 6;
  CHECK(evaluate_llm_batch(*centroid, batch, serial) == evaluate_llm_batch(*centroid, batch, parallel));
}

TEST_CASE("rate limit spaces requests") {
  const auto batch = probe_batch(6);
  auto ones = make_builtin_predictor("constant:1");
  ProbeOptions opts;
  opts.concurrency = 3;
  opts.min_request_interval = std::chrono::milliseconds(25);
  const auto t0 = std::chrono::steady_clock::now();
  evaluate_llm_batch(*ones, batch, opts);
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(125));
}

TEST_CASE("warm cache replays identical metrics without backend calls") {
  testing::TempDir dir;
  const auto batch = probe_batch(10, 0.2);
  auto centroid = make_builtin_predictor("centroid");
  ProbeOptions opts;
  opts.include_loo = true;
  CachedPredictor first(centroid, dir.path());
  const auto a = evaluate_llm_batch(first, batch, opts);
  CHECK(first.backend_calls() == 60);
  CachedPredictor replay(nullptr, dir.path(), "builtin:centroid");
  const auto b = evaluate_llm_batch(replay, batch, opts);
  CHECK(a == b);
  CHECK(replay.hits() == 60);
}

TEST_CASE("regression prompts and predictor adapter") {
  const auto tasks = sample_regression_tasks(RegressionKind::linear, 2, 3, 1.0, 4, 1);
  const auto prompt = build_regression_prompt(tasks[0]);
  CHECK(prompt.ends_with(" -> y:"));
  CHECK(std::count(prompt.begin(), prompt.end(), '\n') == 5);
  FunctionPredictor zero("zero", [](const std::string&) { return std::string("0.0"); });
  const auto r = mse_eval(llm_regression_predictor(zero), tasks);
  double expect = 0;
  for (const auto& t : tasks) expect += t.query_y * t.query_y;
  CHECK(r.mse == doctest::Approx(expect / 4));
  FunctionPredictor words("w", [](const std::string&) { return std::string("zero"); });
  CHECK_THROWS_AS(mse_eval(llm_regression_predictor(words), tasks), EmptyDataError);
}

TEST_CASE("metrics JSON") {
  DualMetrics m;
  m.query_accuracy = 0.5;
  m.n_tasks = 3;
  const auto j = to_json(m);
  CHECK(j.at("query_accuracy") == 0.5);
  CHECK(j.at("n_tasks") == 3);
  CHECK(j.contains("icl_loo_accuracy"));
  CHECK(j.contains("parse_failure_rate"));
}
