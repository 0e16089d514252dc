#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iclab/random_stream.hpp"
#include "iclab/task_config.hpp"

namespace iclab {

enum class LabelSource { clean, noisy };
enum class BatchRole { train, validation };

std::string_view to_string(BatchRole role) noexcept;

// One Gaussian-mixture classification task: x_i = y_i * mu + z_i, z_i ~ N(0, I).
// Labels are stored as +-1.0 so they enter linear algebra directly.
struct Task {
  Eigen::VectorXd mu;
  Eigen::MatrixXd context_x;  // N x d, row i is x_i
  Eigen::VectorXd context_y_clean;
  Eigen::VectorXd context_y_noisy;
  std::vector<bool> flip_mask;
  Eigen::VectorXd query_x;
  int query_y_clean = 1;
  int query_y_noisy = 1;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mu.size()); }
  std::size_t context_size() const noexcept { return static_cast<std::size_t>(context_x.rows()); }
  const Eigen::VectorXd& context_labels(LabelSource source) const noexcept {
    return source == LabelSource::clean ? context_y_clean : context_y_noisy;
  }
  int query_label(LabelSource source) const noexcept {
    return source == LabelSource::clean ? query_y_clean : query_y_noisy;
  }
};

struct TaskBatch {
  std::vector<Task> tasks;
  std::string config_fingerprint;
  BatchRole role = BatchRole::train;
  std::int64_t step_index = 0;

  std::size_t size() const noexcept { return tasks.size(); }
};

// Uniform draw from the sphere of radius `radius` in R^d.
Eigen::VectorXd sample_mu(std::size_t d, double radius, RandomStream& stream);

struct NoisyLabels {
  Eigen::VectorXd labels;
  std::vector<bool> flip_mask;
};

// Negates each label independently with probability epsilon in [0, 0.5).
NoisyLabels inject_label_noise(const Eigen::VectorXd& labels, double epsilon,
                               RandomStream& stream);

// Task `task_index` of the batch addressed by (config.base_seed, role, step).
Task sample_task(const TaskConfig& config, BatchRole role, std::int64_t step,
                 std::size_t task_index);

TaskBatch sample_task_batch(const TaskConfig& config, BatchRole role, std::int64_t step);

// What the query loss needs from a batch: per-task context mean (noisy
// labels), query input and training query label, one task per row.
struct QuerySummary {
  Eigen::MatrixXd context_means;   // B x d
  Eigen::MatrixXd query_x;         // B x d
  Eigen::VectorXd query_labels;    // training labels (noisy under context_and_query)
  Eigen::VectorXd query_labels_clean;

  std::size_t size() const noexcept { return static_cast<std::size_t>(query_x.rows()); }
};

QuerySummary summarize(const TaskBatch& batch);

// Draws a QuerySummary directly from its exact distribution without
// materializing the N context points:
//   mu_hat = ((N - 2F) / N) mu + g / sqrt(N),  F ~ Bin(N, eps_ctx), g ~ N(0, I).
// Task means and query labels come from the same streams as sample_task;
// the Gaussian noise does not.
QuerySummary sample_query_summary(const TaskConfig& config, BatchRole role, std::int64_t step);

}  // namespace iclab
