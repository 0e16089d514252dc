#include "iclab/regression_baselines.hpp"

#include <cmath>
#include <string>

#include "iclab/errors.hpp"
#include "iclab/random_stream.hpp"

namespace iclab {

std::string_view to_string(RegressionKind kind) noexcept {
  return kind == RegressionKind::linear ? "linear" : "sine";
}

RegressionKind parse_regression_kind(std::string_view text) {
  if (text == "linear") return RegressionKind::linear;
  if (text == "sine") return RegressionKind::sine;
  throw ConfigError("unknown regression kind '" + std::string(text) + "' (expected linear or sine)");
}

std::string_view to_string(GdVariant variant) noexcept { return variant == GdVariant::gd1 ? "gd1" : "gdpp"; }

GdVariant parse_gd_variant(std::string_view text) {
  if (text == "gd1") return GdVariant::gd1;
  if (text == "gdpp" || text == "gd++") return GdVariant::gdpp;
  throw ConfigError("unknown GD variant '" + std::string(text) + "' (expected gd1 or gdpp)");
}

double RegressionTask::target(const Eigen::VectorXd& x) const {
  const double inner = weights.dot(x);
  return kind == RegressionKind::linear ? inner : std::sin(inner);
}

std::vector<RegressionTask> sample_regression_tasks(RegressionKind kind, std::size_t d, std::size_t n,
                                                    double alpha, std::size_t count, std::uint64_t seed) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive and finite");
  if (d == 0) throw ConfigError("regression dimension must be >= 1");
  if (n == 0) throw ConfigError("regression context length must be >= 1");

  std::vector<RegressionTask> tasks;
  tasks.reserve(count);
  const auto di = static_cast<Eigen::Index>(d);
  const auto ni = static_cast<Eigen::Index>(n);
  for (std::size_t t = 0; t < count; ++t) {
    RegressionTask task;
    task.kind = kind;
    task.alpha = alpha;

    RandomStream params({seed, StreamRole::regression, 0, t, StreamField::task_params});
    task.weights.resize(di);
    for (Eigen::Index k = 0; k < di; ++k) task.weights[k] = params.gaussian();

    // The query is drawn first so that longer contexts extend shorter ones
    // under the same seed.
    RandomStream inputs({seed, StreamRole::regression, 0, t, StreamField::inputs});
    task.query_x.resize(di);
    for (Eigen::Index k = 0; k < di; ++k) task.query_x[k] = inputs.uniform(-alpha, alpha);
    task.context_x.resize(ni, di);
    for (Eigen::Index i = 0; i < ni; ++i) {
      for (Eigen::Index k = 0; k < di; ++k) task.context_x(i, k) = inputs.uniform(-alpha, alpha);
    }

    task.context_y.resize(ni);
    for (Eigen::Index i = 0; i < ni; ++i) task.context_y[i] = task.target(task.context_x.row(i).transpose());
    task.query_y = task.target(task.query_x);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

double gd_baseline_predict(const RegressionTask& task, GdVariant variant, double lr, double ridge) {
  const auto n = task.context_x.rows();
  const auto d = task.context_x.cols();
  if (n < 1) throw ShapeError("regression task has no context examples");
  if (task.context_y.size() != n || task.query_x.size() != d) throw ShapeError("regression task shapes disagree");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be nonnegative");

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd w = (lr * inv_n) * (task.context_x.transpose() * task.context_y);
  if (variant == GdVariant::gdpp) {
    Eigen::MatrixXd gamma = inv_n * (task.context_x.transpose() * task.context_x);
    gamma.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(gamma);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
      throw NumericalError("GD++ preconditioner is singular (N=" + std::to_string(n) + ", d=" + std::to_string(d) +
                           ", ridge=" + std::to_string(ridge) + ")");
    }
    w = llt.solve(w);
  }
  return w.dot(task.query_x);
}

RegressionPredictor gd_predictor(GdVariant variant, double lr, double ridge) {
  return [=](const RegressionTask& task) -> std::optional<double> {
    try {
      return gd_baseline_predict(task, variant, lr, ridge);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
}

MseResult mse_eval(const RegressionPredictor& predictor, const std::vector<RegressionTask>& tasks) {
  MseResult out;
  double sum = 0.0;
  for (const auto& task : tasks) {
    const auto pred = predictor(task);
    if (!pred || !std::isfinite(*pred)) {
      ++out.n_failed;
      continue;
    }
    const double err = *pred - task.query_y;
    sum += err * err;
    ++out.n_success;
  }
  if (out.n_success == 0) {
    throw EmptyDataError("mse_eval: no successful predictions out of " + std::to_string(tasks.size()) + " tasks");
  }
  out.mse = sum / static_cast<double>(out.n_success);
  return out;
}

}  // namespace iclab
