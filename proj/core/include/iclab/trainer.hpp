#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "iclab/linear_model.hpp"
#include "iclab/task_generator.hpp"

namespace iclab {

// Metrics recorded at one evaluation point. `step` is the 0-based index of
// the SGD update after which validation and in-context accuracy were
// measured; train accuracy and loss come from that step's gradient batch,
// scored before the update.
struct EvalRecord {
  std::int64_t step = 0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double in_context_accuracy = 0.0;
  double mean_query_loss = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct Trajectory {
  TaskConfig config;  // base_seed equals `seed`
  std::uint64_t seed = 0;
  std::vector<EvalRecord> records;
  double best_validation_accuracy = 0.0;
  std::optional<std::int64_t> step_to_near_optimal;
  double wall_time_seconds = 0.0;
  // Run-level provenance copied into manifests.
  std::string train_sampling = "full";

  const EvalRecord& final_record() const { return records.back(); }
};

// log(1 + exp(-label * score)) without overflow for large |score|.
double logistic_loss(double score, int label) noexcept;

struct LossAndGradient {
  double mean_loss = 0.0;
  Eigen::MatrixXd gradient;  // d x d
  // Fraction of query scores whose sign matches the training label.
  double accuracy = 0.0;
};

// Mean query logistic loss and its gradient with respect to W:
//   grad = (1/B) sum_t -y_t sigmoid(-y_t s_t) mu_hat_t x_t^T.
LossAndGradient batch_loss_and_gradient(const LinearModel& model, const QuerySummary& summary);
LossAndGradient batch_loss_and_gradient(const LinearModel& model, const TaskBatch& batch);

enum class TrainSampling {
  full,     // materialize every context point (sample_task_batch)
  summary,  // draw the per-task sufficient statistics directly
};

std::string_view to_string(TrainSampling sampling) noexcept;

struct TrainOptions {
  ContextMode icl_mode = ContextMode::include_self;
  LabelSource icl_label_source = LabelSource::noisy;
  TrainSampling sampling = TrainSampling::full;
  double near_optimal_threshold = 0.99;
  // Stop once validation has stayed at the near-optimal level for
  // `plateau_patience` consecutive evaluations. Off by default.
  bool stop_on_plateau = false;
  int plateau_patience = 5;
  std::function<void(const EvalRecord&)> on_record;
};

struct ValidationMetrics {
  double validation_accuracy = 0.0;
  double in_context_accuracy = 0.0;
};

// Validation accuracy compares query predictions against the batch's query
// labels as generated (clean unless the noise scope covers the query).
// In-context accuracy covers all N*B context positions.
ValidationMetrics evaluate(const LinearModel& model, const TaskBatch& validation_batch,
                           ContextMode icl_mode = ContextMode::include_self,
                           LabelSource icl_label_source = LabelSource::noisy);

struct TrainResult {
  Trajectory trajectory;
  LinearModel model;
};

// SGD from W = 0. Throws NumericalError with step, loss and gradient norm if
// the loss or gradient becomes non-finite.
TrainResult train(const TaskConfig& config, std::uint64_t seed, const TrainOptions& options = {});
Trajectory train_run(const TaskConfig& config, std::uint64_t seed, const TrainOptions& options = {});

// Highest validation accuracy an optimal clean classifier can show.
double attainable_validation_accuracy(const TaskConfig& config) noexcept;

std::optional<std::int64_t> step_to_near_optimal(const Trajectory& trajectory, double threshold);

}  // namespace iclab
