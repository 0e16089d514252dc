#include <doctest.h>

#include <cmath>
#include <fstream>

#include "iclab/errors.hpp"
#include "iclab/linear_model.hpp"
#include "test_support.hpp"

using namespace iclab;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  RandomStream s(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s.gaussian();
  return m;
}

// Direct O(N d) recomputation of mu_hat without row i.
double brute_loo_score(const Eigen::MatrixXd& w, const Task& t, std::size_t i) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(t.context_x.cols());
  for (std::size_t j = 0; j < t.context_size(); ++j) {
    if (j == i) continue;
    sum += t.context_y_noisy[static_cast<Eigen::Index>(j)] * t.context_x.row(static_cast<Eigen::Index>(j)).transpose();
  }
  sum /= static_cast<double>(t.context_size() - 1);
  return sum.dot(w * t.context_x.row(static_cast<Eigen::Index>(i)).transpose());
}

}  // namespace

TEST_CASE("construction and gradient steps") {
  LinearModel m(4);
  CHECK(m.weights().isZero());
  CHECK(m.dim() == 4);
  m.apply_gradient(Eigen::MatrixXd::Identity(4, 4), 0.5);
  CHECK(m.weights().isApprox(-0.5 * Eigen::MatrixXd::Identity(4, 4)));
  CHECK_THROWS_AS(m.apply_gradient(Eigen::MatrixXd::Zero(3, 4), 1.0), ShapeError);
  CHECK_THROWS_AS(LinearModel(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(LinearModel{bad}, NumericalError);
  CHECK_THROWS_AS(LinearModel(std::size_t{0}), ConfigError);
}

TEST_CASE("query score is mu_hat^T W x") {
  const auto c = testing::small_config(5, 4, 1);
  const Task t = sample_task(c, BatchRole::train, 0, 0);
  const LinearModel m(random_matrix(5, 5, 3));
  const auto est = context_mean(t, LabelSource::noisy);
  Eigen::VectorXd mh = Eigen::VectorXd::Zero(5);
  for (Eigen::Index i = 0; i < 4; ++i) mh += t.context_y_noisy[i] * t.context_x.row(i).transpose();
  mh /= 4.0;
  CHECK((est.mu_hat - mh).norm() < 1e-12);
  CHECK(predict_query(m, est, t.query_x) == doctest::Approx(mh.dot(m.weights() * t.query_x)));
  CHECK_THROWS_AS(predict_query(m, est, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("predicted_label breaks ties toward +1") {
  static_assert(predicted_label(0.0) == 1);
  static_assert(predicted_label(-1e-300) == -1);
  CHECK(predicted_label(2.0) == 1);
}

TEST_CASE("leave-one-out matches brute force on N <= 5") {
  for (std::size_t n = 2; n <= 5; ++n) {
    auto c = testing::small_config(4, n, 1);
    c.noise = {0.3, NoiseScope::context_only};
    for (std::size_t task = 0; task < 10; ++task) {
      const Task t = sample_task(c, BatchRole::validation, 0, task);
      const LinearModel m(random_matrix(4, 4, 100 + task));
      const auto scores = predict_context(m, t, ContextMode::leave_one_out, LabelSource::noisy);
      for (std::size_t i = 0; i < n; ++i) {
        const double brute = brute_loo_score(m.weights(), t, i);
        CHECK(std::abs(scores[static_cast<Eigen::Index>(i)] - brute) <= 1e-10 * (1 + std::abs(brute)));
        const auto est = context_mean(t, LabelSource::noisy, i);
        CHECK(est.excluded_index == i);
        CHECK(predict_query(m, est, t.context_x.row(static_cast<Eigen::Index>(i)).transpose()) ==
              doctest::Approx(brute));
      }
    }
  }
}

TEST_CASE("leave-one-out excludes the example: a lone contrary point cannot vote for itself") {
  Task t;
  t.mu = Eigen::VectorXd::Unit(2, 0);
  t.context_x.resize(3, 2);
  t.context_x << 1, 0, 1, 0, 10, 0;
  t.context_y_clean = (Eigen::VectorXd(3) << 1, 1, -1).finished();
  t.context_y_noisy = t.context_y_clean;
  t.flip_mask.assign(3, false);
  t.query_x = Eigen::VectorXd::Unit(2, 0);
  const LinearModel m(Eigen::MatrixXd::Identity(2, 2));
  const auto with_self = predict_context(m, t, ContextMode::include_self, LabelSource::noisy);
  const auto loo = predict_context(m, t, ContextMode::leave_one_out, LabelSource::noisy);
  CHECK(with_self[2] < 0);  // its own large vote dominates the mean
  CHECK(loo[2] > 0);        // without it the other two say +1
  CHECK(predicted_label(loo[2]) != static_cast<int>(t.context_y_noisy[2]));
  CHECK(loo[0] == doctest::Approx((1.0 * 1 + (-1.0) * 10) / 2.0));
}

TEST_CASE("leave-one-out needs two examples") {
  const auto c = testing::small_config(3, 1, 1);
  const Task t = sample_task(c, BatchRole::train, 0, 0);
  const LinearModel m(3);
  CHECK_THROWS_AS(predict_context(m, t, ContextMode::leave_one_out, LabelSource::noisy), DegenerateContextError);
  CHECK_THROWS_AS(context_mean(t, LabelSource::noisy, 0), DegenerateContextError);
  CHECK_NOTHROW(predict_context(m, t, ContextMode::include_self, LabelSource::noisy));
}

TEST_CASE("positive scaling of W never changes a prediction") {
  const auto c = testing::small_config(6, 5, 30);
  const auto batch = sample_task_batch(c, BatchRole::validation, 0);
  const Eigen::MatrixXd w = random_matrix(6, 6, 8);
  const LinearModel base(w);
  for (double k : {1e-6, 0.5, 3.0, 1e6}) {
    const LinearModel scaled(k * w);
    for (const auto& t : batch.tasks) {
      const auto est = context_mean(t, LabelSource::noisy);
      CHECK(predicted_label(predict_query(base, est, t.query_x)) ==
            predicted_label(predict_query(scaled, est, t.query_x)));
      const auto a = predict_context(base, t, ContextMode::include_self, LabelSource::noisy);
      const auto b = predict_context(scaled, t, ContextMode::include_self, LabelSource::noisy);
      for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(predicted_label(a[i]) == predicted_label(b[i]));
    }
  }
}

TEST_CASE("batched scoring agrees with per-task scoring") {
  auto c = testing::small_config(5, 4, 12);
  c.noise = {0.25, NoiseScope::context_only};
  const auto batch = sample_task_batch(c, BatchRole::validation, 2);
  const LinearModel m(random_matrix(5, 5, 9));
  for (auto mode : {ContextMode::include_self, ContextMode::leave_one_out}) {
    for (auto src : {LabelSource::clean, LabelSource::noisy}) {
      const auto all = batch_context_scores(m, batch, mode, src);
      REQUIRE(all.rows() == 12);
      REQUIRE(all.cols() == 4);
      for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto one = predict_context(m, batch.tasks[t], mode, src);
        CHECK((all.row(static_cast<Eigen::Index>(t)).transpose() - one).norm() < 1e-10);
      }
    }
  }
  const auto s = summarize(batch);
  const auto rows = score_rows(m, s.context_means, s.query_x);
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto est = context_mean(batch.tasks[t], LabelSource::noisy);
    CHECK(rows[static_cast<Eigen::Index>(t)] == doctest::Approx(predict_query(m, est, batch.tasks[t].query_x)));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  testing::TempDir dir;
  const LinearModel m(random_matrix(7, 7, 1));
  const auto path = dir.path() / "sub" / "w.bin";
  save_checkpoint(path, m, {7, 120, "deadbeef"});
  const auto ck = load_checkpoint(path);
  CHECK(ck.header.d == 7);
  CHECK(ck.header.step == 120);
  CHECK(ck.header.config_fingerprint == "deadbeef");
  CHECK(ck.model.weights() == m.weights());
  CHECK_THROWS_AS(save_checkpoint(path, m, {3, 0, ""}), ShapeError);

  std::ofstream(dir.path() / "broken.bin") << "no header";
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "broken.bin"), IoError);
  std::ofstream(dir.path() / "short.bin") << "{\"d\":2,\"step\":0,\"config_fingerprint\":\"\"}\nabc";
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "short.bin"), IoError);
}
