#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace iclab {

enum class RegressionKind { linear, sine };
std::string_view to_string(RegressionKind kind) noexcept;
RegressionKind parse_regression_kind(std::string_view text);

// linear: y = <weights, x>; sine: y = sin(<weights, x>). Inputs are uniform
// on [-alpha, alpha], weights standard normal.
struct RegressionTask {
  RegressionKind kind = RegressionKind::linear;
  Eigen::VectorXd weights;
  Eigen::MatrixXd context_x;  // N x d
  Eigen::VectorXd context_y;
  Eigen::VectorXd query_x;
  double query_y = 0.0;
  double alpha = 1.0;

  double target(const Eigen::VectorXd& x) const;
};

std::vector<RegressionTask> sample_regression_tasks(RegressionKind kind, std::size_t d, std::size_t n,
                                                    double alpha, std::size_t count, std::uint64_t seed);

enum class GdVariant { gd1, gdpp };
std::string_view to_string(GdVariant variant) noexcept;
GdVariant parse_gd_variant(std::string_view text);

// gd1:  w = (lr/N) sum y_i x_i
// gdpp: w = Gamma^{-1} (lr/N) sum y_i x_i,  Gamma = (1/N) sum x_i x_i^T + ridge I
// Prediction is <w, x_q>. gdpp throws NumericalError when Gamma is singular
// or too ill-conditioned to invert.
double gd_baseline_predict(const RegressionTask& task, GdVariant variant, double lr, double ridge = 0.0);

// nullopt marks a failed prediction (excluded from the mean, counted).
using RegressionPredictor = std::function<std::optional<double>(const RegressionTask&)>;

RegressionPredictor gd_predictor(GdVariant variant, double lr, double ridge = 0.0);

struct MseResult {
  double mse = 0.0;
  std::size_t n_success = 0;
  std::size_t n_failed = 0;
};

// Throws EmptyDataError when no prediction succeeds.
MseResult mse_eval(const RegressionPredictor& predictor, const std::vector<RegressionTask>& tasks);

}  // namespace iclab
