#include "iclab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "iclab/errors.hpp"

namespace iclab {

double logistic_loss(double score, int label) noexcept {
  const double margin = static_cast<double>(label) * score;
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

namespace {

// sigmoid(-margin), stable on both tails.
double sigmoid_neg(double margin) noexcept {
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(margin));
}

}  // namespace

LossAndGradient batch_loss_and_gradient(const LinearModel& model, const QuerySummary& summary) {
  const auto b = static_cast<Eigen::Index>(summary.size());
  if (b == 0) throw ShapeError("batch_loss_and_gradient: empty batch");
  const Eigen::VectorXd scores = score_rows(model, summary.context_means, summary.query_x);

  Eigen::VectorXd coeff(b);
  double loss = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index t = 0; t < b; ++t) {
    const int y = summary.query_labels[t] > 0 ? 1 : -1;
    loss += logistic_loss(scores[t], y);
    coeff[t] = -y * sigmoid_neg(y * scores[t]) / static_cast<double>(b);
    if (predicted_label(scores[t]) == y) ++correct;
  }
  LossAndGradient out;
  out.mean_loss = loss / static_cast<double>(b);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(b);
  out.gradient.noalias() =
      (summary.context_means.array().colwise() * coeff.array()).matrix().transpose() * summary.query_x;
  return out;
}

LossAndGradient batch_loss_and_gradient(const LinearModel& model, const TaskBatch& batch) {
  return batch_loss_and_gradient(model, summarize(batch));
}

std::string_view to_string(TrainSampling sampling) noexcept {
  return sampling == TrainSampling::full ? "full" : "summary";
}

ValidationMetrics evaluate(const LinearModel& model, const TaskBatch& validation_batch,
                           ContextMode icl_mode, LabelSource icl_label_source) {
  if (validation_batch.role != BatchRole::validation) {
    throw ConfigError("evaluate: expected a validation batch");
  }
  if (validation_batch.tasks.empty()) throw ShapeError("evaluate: empty validation batch");
  const QuerySummary summary = summarize(validation_batch);
  const Eigen::VectorXd scores = score_rows(model, summary.context_means, summary.query_x);
  Eigen::Index query_hits = 0;
  for (Eigen::Index t = 0; t < scores.size(); ++t) {
    if (predicted_label(scores[t]) == static_cast<int>(summary.query_labels[t])) ++query_hits;
  }

  const Eigen::MatrixXd ctx = batch_context_scores(model, validation_batch, icl_mode, icl_label_source);
  Eigen::Index ctx_hits = 0;
  for (Eigen::Index t = 0; t < ctx.rows(); ++t) {
    const Eigen::VectorXd& y = validation_batch.tasks[static_cast<std::size_t>(t)].context_labels(icl_label_source);
    for (Eigen::Index i = 0; i < ctx.cols(); ++i) {
      if (predicted_label(ctx(t, i)) == static_cast<int>(y[i])) ++ctx_hits;
    }
  }
  ValidationMetrics m;
  m.validation_accuracy = static_cast<double>(query_hits) / static_cast<double>(scores.size());
  m.in_context_accuracy = static_cast<double>(ctx_hits) / static_cast<double>(ctx.size());
  return m;
}

double attainable_validation_accuracy(const TaskConfig& config) noexcept {
  return 1.0 - config.noise.query_epsilon();
}

std::optional<std::int64_t> step_to_near_optimal(const Trajectory& trajectory, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("near-optimal threshold must lie in (0, 1]");
  }
  const double target = threshold * attainable_validation_accuracy(trajectory.config);
  for (const auto& r : trajectory.records) {
    if (r.validation_accuracy >= target - 1e-12) return r.step;
  }
  return std::nullopt;
}

TrainResult train(const TaskConfig& base, std::uint64_t seed, const TrainOptions& options) {
  const TaskConfig config = base.with_seed(seed);
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  TrainResult result{Trajectory{}, LinearModel(config.d)};
  Trajectory& traj = result.trajectory;
  traj.config = config;
  traj.seed = seed;
  traj.train_sampling = std::string(to_string(options.sampling));
  LinearModel& model = result.model;

  const double target = options.near_optimal_threshold * attainable_validation_accuracy(config);
  int plateau_run = 0;

  for (std::int64_t step = 0; step < config.max_steps; ++step) {
    const QuerySummary train_batch = options.sampling == TrainSampling::full
                                         ? summarize(sample_task_batch(config, BatchRole::train, step))
                                         : sample_query_summary(config, BatchRole::train, step);
    LossAndGradient lg = batch_loss_and_gradient(model, train_batch);
    if (!std::isfinite(lg.mean_loss) || !lg.gradient.allFinite()) {
      std::ostringstream msg;
      msg << "training diverged at step " << step << ": loss=" << lg.mean_loss
          << " gradient_norm=" << lg.gradient.norm();
      throw NumericalError(msg.str());
    }
    model.apply_gradient(lg.gradient, config.learning_rate);

    const bool last = step + 1 == config.max_steps;
    if (step % config.eval_every != 0 && !last) continue;

    const TaskBatch validation = sample_task_batch(config, BatchRole::validation, step);
    const ValidationMetrics vm = evaluate(model, validation, options.icl_mode, options.icl_label_source);
    EvalRecord rec{step, lg.accuracy, vm.validation_accuracy, vm.in_context_accuracy, lg.mean_loss};
    traj.records.push_back(rec);
    if (options.on_record) options.on_record(rec);

    if (options.stop_on_plateau) {
      plateau_run = rec.validation_accuracy >= target - 1e-12 ? plateau_run + 1 : 0;
      if (plateau_run >= options.plateau_patience) break;
    }
  }

  for (const auto& r : traj.records) {
    traj.best_validation_accuracy = std::max(traj.best_validation_accuracy, r.validation_accuracy);
  }
  traj.step_to_near_optimal = step_to_near_optimal(traj, options.near_optimal_threshold);
  traj.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

Trajectory train_run(const TaskConfig& config, std::uint64_t seed, const TrainOptions& options) {
  return train(config, seed, options).trajectory;
}

}  // namespace iclab
