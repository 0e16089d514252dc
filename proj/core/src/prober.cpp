#include "iclab/prober.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "iclab/errors.hpp"
#include "iclab/prompt.hpp"

namespace iclab {

std::optional<std::string> complete_with_retry(Predictor& predictor, const std::string& prompt, int max_retries,
                                               std::chrono::milliseconds initial_backoff) {
  auto backoff = initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return predictor.complete(prompt);
    } catch (const TransportError&) {
      if (attempt >= max_retries) return std::nullopt;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

namespace {

struct Job {
  std::string prompt;
  int expected = 0;
  bool loo = false;
};

enum class Outcome { correct, wrong, unparsed, transport };

class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}

  void acquire() {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::chrono::milliseconds interval_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

}  // namespace

DualMetrics evaluate_llm_batch(Predictor& predictor, const TaskBatch& batch, const ProbeOptions& options) {
  if (options.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  std::vector<Job> jobs;
  for (const auto& task : batch.tasks) {
    const auto q = build_classification_prompt(task);
    jobs.push_back({q.text(), q.expected_label, false});
    if (options.include_loo) {
      for (std::size_t i = 0; i < task.context_size(); ++i) {
        const auto p = build_classification_prompt(task, i);
        jobs.push_back({p.text(), p.expected_label, true});
      }
    }
  }

  std::vector<Outcome> outcomes(jobs.size(), Outcome::transport);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  RateLimiter limiter(options.min_request_interval);

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      limiter.acquire();
      const auto reply = complete_with_retry(predictor, jobs[idx].prompt, options.max_retries, options.initial_backoff);
      if (!reply) {
        outcomes[idx] = Outcome::transport;
      } else if (const auto label = parse_label(*reply)) {
        outcomes[idx] = *label == jobs[idx].expected ? Outcome::correct : Outcome::wrong;
      } else {
        outcomes[idx] = Outcome::unparsed;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (options.on_progress) {
        std::lock_guard lock(progress_mutex);
        options.on_progress(finished, jobs.size());
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(options.concurrency, 1, std::max<std::size_t>(jobs.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  DualMetrics m;
  m.n_tasks = batch.tasks.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const bool loo = jobs[i].loo;
    (loo ? m.loo_requests : m.query_requests) += 1;
    switch (outcomes[i]) {
      case Outcome::correct:
        (loo ? m.loo_correct : m.query_correct) += 1;
        [[fallthrough]];
      case Outcome::wrong:
        (loo ? m.loo_parsed : m.query_parsed) += 1;
        break;
      case Outcome::unparsed:
        ++m.parse_failures;
        break;
      case Outcome::transport:
        ++m.transport_failures;
        break;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  m.query_accuracy = ratio(m.query_correct, m.query_parsed);
  m.icl_loo_accuracy = ratio(m.loo_correct, m.loo_parsed);
  m.parse_failure_rate = ratio(m.parse_failures + m.transport_failures, jobs.size());
  return m;
}

nlohmann::json to_json(const DualMetrics& m) {
  return {{"query_accuracy", m.query_accuracy},
          {"icl_loo_accuracy", m.icl_loo_accuracy},
          {"parse_failure_rate", m.parse_failure_rate},
          {"n_tasks", m.n_tasks},
          {"query_requests", m.query_requests},
          {"query_parsed", m.query_parsed},
          {"query_correct", m.query_correct},
          {"loo_requests", m.loo_requests},
          {"loo_parsed", m.loo_parsed},
          {"loo_correct", m.loo_correct},
          {"parse_failures", m.parse_failures},
          {"transport_failures", m.transport_failures}};
}

std::string build_regression_prompt(const RegressionTask& task) {
  std::string out =
      "Each example below maps a feature vector x to a real number y. Use the examples to predict y for the "
      "final point. Output only the number.\n\n";
  for (Eigen::Index i = 0; i < task.context_x.rows(); ++i) {
    out += "x: " + serialize_vector(task.context_x.row(i).transpose()) + " -> y: " + serialize_scalar(task.context_y[i]);
    out += '\n';
  }
  out += "x: " + serialize_vector(task.query_x) + " -> y:";
  return out;
}

RegressionPredictor llm_regression_predictor(Predictor& predictor, int max_retries,
                                             std::chrono::milliseconds initial_backoff) {
  return [&predictor, max_retries, initial_backoff](const RegressionTask& task) -> std::optional<double> {
    const auto reply = complete_with_retry(predictor, build_regression_prompt(task), max_retries, initial_backoff);
    if (!reply) return std::nullopt;
    return parse_number(*reply);
  };
}

}  // namespace iclab
