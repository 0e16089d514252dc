#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "iclab/predictor.hpp"
#include "iclab/regression_baselines.hpp"
#include "iclab/task_generator.hpp"

namespace iclab {

struct DualMetrics {
  double query_accuracy = 0.0;     // vs clean query labels, over parsed answers
  double icl_loo_accuracy = 0.0;   // vs context labels shown in the prompt, over parsed answers
  double parse_failure_rate = 0.0; // (unparseable + transport failures) / requests
  std::size_t n_tasks = 0;

  std::size_t query_requests = 0;
  std::size_t query_correct = 0;
  std::size_t query_parsed = 0;
  std::size_t loo_requests = 0;
  std::size_t loo_correct = 0;
  std::size_t loo_parsed = 0;
  std::size_t parse_failures = 0;
  std::size_t transport_failures = 0;

  bool operator==(const DualMetrics&) const = default;
};

struct ProbeOptions {
  bool include_loo = false;
  std::size_t concurrency = 4;
  // Minimum spacing between request starts across the pool; zero disables.
  std::chrono::milliseconds min_request_interval{0};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::function<void(std::size_t done, std::size_t total)> on_progress;
};

// Retries `predictor.complete` on TransportError with exponential backoff,
// doubling from `initial_backoff`. Returns nullopt once retries are exhausted.
std::optional<std::string> complete_with_retry(Predictor& predictor, const std::string& prompt,
                                               int max_retries, std::chrono::milliseconds initial_backoff);

// Queries every task of the batch (and, with include_loo, every held-out
// context position). Results do not depend on completion order.
DualMetrics evaluate_llm_batch(Predictor& predictor, const TaskBatch& batch, const ProbeOptions& options = {});

nlohmann::json to_json(const DualMetrics& metrics);

// Few-shot regression prompt: "x: <features> -> y: <value>" lines, then the
// query line ending in "y:". The answer is read with parse_number.
std::string build_regression_prompt(const RegressionTask& task);

// Adapts an external predictor into a regression baseline for mse_eval.
// Transport exhaustion and unparseable replies count as failures.
RegressionPredictor llm_regression_predictor(Predictor& predictor, int max_retries = 3,
                                             std::chrono::milliseconds initial_backoff = std::chrono::milliseconds{200});

}  // namespace iclab
