#include "iclab/task_generator.hpp"

#include <cmath>
#include <limits>

#include "iclab/errors.hpp"

namespace iclab {

std::string_view to_string(BatchRole role) noexcept {
  return role == BatchRole::train ? "train" : "validation";
}

Eigen::VectorXd sample_mu(std::size_t d, double radius, RandomStream& stream) {
  if (d == 0) throw ConfigError("sample_mu: dimension must be >= 1");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ConfigError("sample_mu: radius must be positive and finite");
  }
  Eigen::VectorXd g(static_cast<Eigen::Index>(d));
  for (;;) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = stream.gaussian();
    const double norm = g.norm();
    if (norm > std::numeric_limits<double>::min() && std::isfinite(norm)) {
      return g * (radius / norm);
    }
  }
}

NoisyLabels inject_label_noise(const Eigen::VectorXd& labels, double epsilon,
                               RandomStream& stream) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) {
    throw ConfigError("label noise epsilon must lie in [0, 0.5)");
  }
  NoisyLabels out{labels, std::vector<bool>(static_cast<std::size_t>(labels.size()), false)};
  if (epsilon == 0.0) return out;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (stream.bernoulli(epsilon)) {
      out.labels[i] = -labels[i];
      out.flip_mask[static_cast<std::size_t>(i)] = true;
    }
  }
  return out;
}

namespace {

StreamRole stream_role(BatchRole role) {
  return role == BatchRole::train ? StreamRole::train : StreamRole::validation;
}

StreamKey key_for(const TaskConfig& c, BatchRole role, std::int64_t step, std::size_t task,
                  StreamField field) {
  return StreamKey{c.base_seed, stream_role(role), step, task, field};
}

// Draws shared by the full and summary sampling paths.
struct SharedDraws {
  Eigen::VectorXd mu;
  int query_clean;
  int query_noisy;
};

SharedDraws shared_draws(const TaskConfig& c, double radius, BatchRole role, std::int64_t step,
                         std::size_t task) {
  RandomStream mu_stream(key_for(c, role, step, task, StreamField::mu));
  RandomStream label_stream(key_for(c, role, step, task, StreamField::query_label));
  RandomStream flip_stream(key_for(c, role, step, task, StreamField::query_flip));
  SharedDraws s;
  s.mu = sample_mu(c.d, radius, mu_stream);
  s.query_clean = label_stream.rademacher();
  const double qeps = c.noise.query_epsilon();
  s.query_noisy = (qeps > 0.0 && flip_stream.bernoulli(qeps)) ? -s.query_clean : s.query_clean;
  return s;
}

}  // namespace

Task sample_task(const TaskConfig& c, BatchRole role, std::int64_t step, std::size_t task_index) {
  const double radius = c.signal_magnitude();
  const auto d = static_cast<Eigen::Index>(c.d);
  const auto n = static_cast<Eigen::Index>(c.n);

  SharedDraws shared = shared_draws(c, radius, role, step, task_index);

  Task t;
  t.mu = std::move(shared.mu);
  t.query_y_clean = shared.query_clean;
  t.query_y_noisy = shared.query_noisy;

  RandomStream labels(key_for(c, role, step, task_index, StreamField::labels));
  t.context_y_clean.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) t.context_y_clean[i] = labels.rademacher();

  RandomStream noise(key_for(c, role, step, task_index, StreamField::gaussian_noise));
  t.context_x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = t.context_y_clean[i];
    for (Eigen::Index k = 0; k < d; ++k) t.context_x(i, k) = y * t.mu[k] + noise.gaussian();
  }
  t.query_x.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    t.query_x[k] = t.query_y_clean * t.mu[k] + noise.gaussian();
  }

  RandomStream flips(key_for(c, role, step, task_index, StreamField::label_flips));
  auto noisy = inject_label_noise(t.context_y_clean, c.noise.context_epsilon(), flips);
  t.context_y_noisy = std::move(noisy.labels);
  t.flip_mask = std::move(noisy.flip_mask);
  return t;
}

TaskBatch sample_task_batch(const TaskConfig& config, BatchRole role, std::int64_t step) {
  config.validate();
  TaskBatch batch;
  batch.config_fingerprint = config_fingerprint(config);
  batch.role = role;
  batch.step_index = step;
  batch.tasks.reserve(config.b);
  for (std::size_t t = 0; t < config.b; ++t) batch.tasks.push_back(sample_task(config, role, step, t));
  return batch;
}

QuerySummary summarize(const TaskBatch& batch) {
  QuerySummary s;
  if (batch.tasks.empty()) return s;
  const auto b = static_cast<Eigen::Index>(batch.tasks.size());
  const auto d = static_cast<Eigen::Index>(batch.tasks.front().dim());
  s.context_means.resize(b, d);
  s.query_x.resize(b, d);
  s.query_labels.resize(b);
  s.query_labels_clean.resize(b);
  for (Eigen::Index t = 0; t < b; ++t) {
    const Task& task = batch.tasks[static_cast<std::size_t>(t)];
    if (static_cast<Eigen::Index>(task.dim()) != d) {
      throw ShapeError("summarize: tasks in a batch must share a dimension");
    }
    s.context_means.row(t) =
        (task.context_x.transpose() * task.context_y_noisy) / static_cast<double>(task.context_size());
    s.query_x.row(t) = task.query_x;
    s.query_labels[t] = task.query_y_noisy;
    s.query_labels_clean[t] = task.query_y_clean;
  }
  return s;
}

QuerySummary sample_query_summary(const TaskConfig& c, BatchRole role, std::int64_t step) {
  c.validate();
  const double radius = c.signal_magnitude();
  const auto b = static_cast<Eigen::Index>(c.b);
  const auto d = static_cast<Eigen::Index>(c.d);
  const int n = static_cast<int>(c.n);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  QuerySummary s;
  s.context_means.resize(b, d);
  s.query_x.resize(b, d);
  s.query_labels.resize(b);
  s.query_labels_clean.resize(b);
  for (Eigen::Index t = 0; t < b; ++t) {
    const auto task = static_cast<std::size_t>(t);
    SharedDraws shared = shared_draws(c, radius, role, step, task);
    RandomStream stream(key_for(c, role, step, task, StreamField::summary));
    const int flipped = stream.binomial(n, c.noise.context_epsilon());
    const double agreement = static_cast<double>(n - 2 * flipped) / n;
    for (Eigen::Index k = 0; k < d; ++k) {
      s.context_means(t, k) = agreement * shared.mu[k] + inv_sqrt_n * stream.gaussian();
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      s.query_x(t, k) = shared.query_clean * shared.mu[k] + stream.gaussian();
    }
    s.query_labels[t] = shared.query_noisy;
    s.query_labels_clean[t] = shared.query_clean;
  }
  return s;
}

}  // namespace iclab
