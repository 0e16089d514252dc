#include "iclab/linear_model.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iclab/errors.hpp"
#include "io_util.hpp"

namespace iclab {

LinearModel::LinearModel(std::size_t d) {
  if (d == 0) throw ConfigError("LinearModel: dimension must be >= 1");
  weights_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

LinearModel::LinearModel(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.rows() != weights_.cols()) {
    throw ShapeError("LinearModel: weights must be a non-empty square matrix");
  }
  if (!weights_.allFinite()) throw NumericalError("LinearModel: weights contain non-finite entries");
}

void LinearModel::apply_gradient(const Eigen::MatrixXd& gradient, double learning_rate) {
  if (gradient.rows() != weights_.rows() || gradient.cols() != weights_.cols()) {
    throw ShapeError("apply_gradient: gradient shape does not match W");
  }
  weights_.noalias() -= learning_rate * gradient;
}

std::string_view to_string(ContextMode mode) noexcept {
  return mode == ContextMode::include_self ? "include_self" : "leave_one_out";
}

std::string_view to_string(LabelSource source) noexcept {
  return source == LabelSource::clean ? "clean" : "noisy";
}

ContextEstimate context_mean(const Task& task, LabelSource source,
                             std::optional<std::size_t> excluded_index) {
  const std::size_t n = task.context_size();
  if (n == 0) throw DegenerateContextError("context_mean: empty context");
  const Eigen::VectorXd& y = task.context_labels(source);
  ContextEstimate est;
  est.source = source;
  est.excluded_index = excluded_index;
  est.mu_hat = task.context_x.transpose() * y;
  if (excluded_index) {
    if (n < 2) throw DegenerateContextError("leave-one-out needs at least two context examples");
    if (*excluded_index >= n) throw std::out_of_range("context_mean: excluded index out of range");
    const auto i = static_cast<Eigen::Index>(*excluded_index);
    est.mu_hat -= y[i] * task.context_x.row(i).transpose();
    est.mu_hat /= static_cast<double>(n - 1);
  } else {
    est.mu_hat /= static_cast<double>(n);
  }
  return est;
}

double predict_query(const LinearModel& model, const ContextEstimate& estimate,
                     const Eigen::VectorXd& x) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (estimate.mu_hat.size() != d || x.size() != d) {
    throw ShapeError("predict_query: expected vectors of length " + std::to_string(d));
  }
  return estimate.mu_hat.dot(model.weights() * x);
}

Eigen::VectorXd predict_context(const LinearModel& model, const Task& task, ContextMode mode,
                                LabelSource source) {
  const auto n = static_cast<Eigen::Index>(task.context_size());
  if (static_cast<std::size_t>(task.context_x.cols()) != model.dim()) {
    throw ShapeError("predict_context: task dimension does not match the model");
  }
  if (mode == ContextMode::leave_one_out && n < 2) {
    throw DegenerateContextError("leave-one-out needs at least two context examples");
  }
  const Eigen::VectorXd& y = task.context_labels(source);
  const Eigen::MatrixXd& x = task.context_x;
  const Eigen::VectorXd full = context_mean(task, source).mu_hat;
  // Row i of x times W^T mu_hat == mu_hat^T W x_i.
  Eigen::VectorXd scores = x * (model.weights().transpose() * full);
  if (mode == ContextMode::leave_one_out) {
    const Eigen::MatrixXd xw = x * model.weights().transpose();
    const Eigen::VectorXd self = (xw.array() * x.array()).rowwise().sum();
    const double nn = static_cast<double>(n);
    scores = (nn * scores - y.cwiseProduct(self)) / (nn - 1.0);
  }
  return scores;
}

Eigen::VectorXd score_rows(const LinearModel& model, const Eigen::MatrixXd& means,
                           const Eigen::MatrixXd& inputs) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (means.cols() != d || inputs.cols() != d || means.rows() != inputs.rows()) {
    throw ShapeError("score_rows: expected two B x d matrices matching the model");
  }
  const Eigen::MatrixXd projected = means * model.weights();
  return (projected.array() * inputs.array()).rowwise().sum();
}

Eigen::MatrixXd batch_context_scores(const LinearModel& model, const TaskBatch& batch,
                                     ContextMode mode, LabelSource source) {
  if (batch.tasks.empty()) return {};
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto n = static_cast<Eigen::Index>(batch.tasks.front().context_size());
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (mode == ContextMode::leave_one_out) {
    Eigen::MatrixXd out(b, n);
    for (Eigen::Index t = 0; t < b; ++t) {
      out.row(t) = predict_context(model, batch.tasks[static_cast<std::size_t>(t)], mode, source).transpose();
    }
    return out;
  }
  Eigen::MatrixXd means(b, d);
  for (Eigen::Index t = 0; t < b; ++t) {
    const Task& task = batch.tasks[static_cast<std::size_t>(t)];
    if (static_cast<Eigen::Index>(task.dim()) != d || static_cast<Eigen::Index>(task.context_size()) != n) {
      throw ShapeError("batch_context_scores: tasks must share d and N with the model");
    }
    means.row(t) = context_mean(task, source).mu_hat.transpose();
  }
  const Eigen::MatrixXd projected = means * model.weights();  // row t = (W^T mu_hat_t)^T
  Eigen::MatrixXd out(b, n);
  for (Eigen::Index t = 0; t < b; ++t) {
    out.row(t) = (batch.tasks[static_cast<std::size_t>(t)].context_x * projected.row(t).transpose()).transpose();
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const LinearModel& model,
                     const CheckpointHeader& header) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  if (header.d != model.dim()) throw ShapeError("checkpoint header d does not match the model");
  nlohmann::json h = {{"d", header.d}, {"step", header.step},
                      {"config_fingerprint", header.config_fingerprint}};
  std::string blob = h.dump();
  blob.push_back('\n');
  const auto d = static_cast<Eigen::Index>(model.dim());
  const std::size_t offset = blob.size();
  blob.resize(offset + sizeof(double) * static_cast<std::size_t>(d * d));
  char* dst = blob.data() + offset;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double v = model.weights()(r, c);
      std::memcpy(dst, &v, sizeof(double));
      dst += sizeof(double);
    }
  }
  detail::write_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = detail::read_file(path);
  const auto newline = blob.find('\n');
  if (newline == std::string::npos) throw IoError("checkpoint " + path.string() + " has no header line");
  CheckpointHeader header;
  try {
    const auto h = nlohmann::json::parse(blob.substr(0, newline));
    header.d = h.at("d").get<std::size_t>();
    header.step = h.at("step").get<std::int64_t>();
    header.config_fingerprint = h.at("config_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path.string() + " has a malformed header: " + e.what());
  }
  const std::size_t expected = header.d * header.d * sizeof(double);
  if (header.d == 0 || blob.size() - newline - 1 != expected) {
    throw IoError("checkpoint " + path.string() + " payload size does not match d");
  }
  const auto d = static_cast<Eigen::Index>(header.d);
  Eigen::MatrixXd w(d, d);
  const char* src = blob.data() + newline + 1;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      double v;
      std::memcpy(&v, src, sizeof(double));
      w(r, c) = v;
      src += sizeof(double);
    }
  }
  return Checkpoint{header, LinearModel(std::move(w))};
}

}  // namespace iclab
