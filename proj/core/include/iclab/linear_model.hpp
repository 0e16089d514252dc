#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "iclab/task_generator.hpp"

namespace iclab {

// The linear in-context classifier. Its whole learnable state is a d x d
// matrix W; a query x is scored as mu_hat^T W x, where mu_hat is the
// label-weighted mean of the context.
class LinearModel {
 public:
  explicit LinearModel(std::size_t d);
  // Throws ShapeError for non-square input, NumericalError for non-finite entries.
  explicit LinearModel(Eigen::MatrixXd weights);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }

  // W <- W - learning_rate * gradient
  void apply_gradient(const Eigen::MatrixXd& gradient, double learning_rate);
  bool is_finite() const noexcept { return weights_.allFinite(); }

 private:
  Eigen::MatrixXd weights_;
};

enum class ContextMode { include_self, leave_one_out };

std::string_view to_string(ContextMode mode) noexcept;
std::string_view to_string(LabelSource source) noexcept;

struct ContextEstimate {
  Eigen::VectorXd mu_hat;
  LabelSource source = LabelSource::noisy;
  std::optional<std::size_t> excluded_index;
};

// mu_hat = (1/m) sum_{i != excluded} y_i x_i, m = N or N - 1.
ContextEstimate context_mean(const Task& task, LabelSource source,
                             std::optional<std::size_t> excluded_index = std::nullopt);

double predict_query(const LinearModel& model, const ContextEstimate& estimate,
                     const Eigen::VectorXd& x);

// Ties at exactly zero resolve to +1.
constexpr int predicted_label(double score) noexcept { return score >= 0.0 ? 1 : -1; }

// Score of every context position against the (possibly leave-one-out) mean.
Eigen::VectorXd predict_context(const LinearModel& model, const Task& task, ContextMode mode,
                                LabelSource source);

// Batched scoring: entry t is row t of `means` through W against row t of `inputs`.
Eigen::VectorXd score_rows(const LinearModel& model, const Eigen::MatrixXd& means,
                           const Eigen::MatrixXd& inputs);

// B x N matrix of context scores for a whole batch. Uses one GEMM for the
// include-self path instead of B matrix-vector products.
Eigen::MatrixXd batch_context_scores(const LinearModel& model, const TaskBatch& batch,
                                     ContextMode mode, LabelSource source);

struct CheckpointHeader {
  std::size_t d = 0;
  std::int64_t step = 0;
  std::string config_fingerprint;
};

// One JSON header line {d, step, config_fingerprint} followed by d*d
// row-major little-endian float64 values.
void save_checkpoint(const std::filesystem::path& path, const LinearModel& model,
                     const CheckpointHeader& header);

struct Checkpoint {
  CheckpointHeader header;
  LinearModel model;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iclab
