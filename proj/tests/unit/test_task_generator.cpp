#include <doctest.h>

#include <cmath>

#include "iclab/errors.hpp"
#include "iclab/task_generator.hpp"
#include "test_support.hpp"

using namespace iclab;

TEST_CASE("mu lies exactly on the sphere") {
  for (std::size_t d : {1u, 2u, 50u, 1500u}) {
    RandomStream s(d);
    for (double r : {0.1, 1.35, 6.45, 100.0}) {
      const auto mu = sample_mu(d, r, s);
      CHECK(mu.size() == static_cast<Eigen::Index>(d));
      CHECK(std::abs(mu.norm() - r) <= 1e-12 * r);
    }
  }
  RandomStream s(0);
  CHECK_THROWS_AS(sample_mu(0, 1.0, s), ConfigError);
  CHECK_THROWS_AS(sample_mu(3, 0.0, s), ConfigError);
}

TEST_CASE("mu direction is isotropic") {
  RandomStream s(77);
  const int d = 5, n = 40000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const auto u = sample_mu(d, 1.0, s);
    mean += u;
    second += u * u.transpose();
  }
  mean /= n;
  second /= n;
  // E[u] = 0, E[u u^T] = I/d; per-entry sd of u_k is 1/sqrt(d).
  CHECK(mean.cwiseAbs().maxCoeff() < 5.0 / std::sqrt(static_cast<double>(d) * n));
  CHECK((second - Eigen::MatrixXd::Identity(d, d) / d).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("label noise: zero epsilon is the identity and bounds are enforced") {
  RandomStream s(1);
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1, -1, 1, 1).finished();
  const auto out = inject_label_noise(y, 0.0, s);
  CHECK(out.labels == y);
  for (bool f : out.flip_mask) CHECK_FALSE(f);
  CHECK_THROWS_AS(inject_label_noise(y, 0.5, s), ConfigError);
  CHECK_THROWS_AS(inject_label_noise(y, -0.01, s), ConfigError);
}

TEST_CASE("flip rate matches the binomial") {
  const double eps = 0.2;
  RandomStream s(31);
  const int trials = 20000;
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(trials);
  const auto out = inject_label_noise(y, eps, s);
  int flips = 0;
  for (Eigen::Index i = 0; i < trials; ++i) {
    const bool f = out.flip_mask[static_cast<std::size_t>(i)];
    flips += f;
    CHECK(out.labels[i] == (f ? -1.0 : 1.0));
  }
  const double sd = std::sqrt(trials * eps * (1 - eps));
  CHECK(std::abs(flips - eps * trials) < 4.5 * sd);
}

TEST_CASE("sample_task structure and reproducibility") {
  auto c = testing::small_config(7, 9, 3);
  c.noise = {0.3, NoiseScope::context_only};
  const Task a = sample_task(c, BatchRole::train, 4, 2);
  const Task b = sample_task(c, BatchRole::train, 4, 2);
  CHECK(a.context_x.rows() == 9);
  CHECK(a.context_x.cols() == 7);
  CHECK(a.query_x.size() == 7);
  CHECK(a.context_x == b.context_x);
  CHECK(a.context_y_noisy == b.context_y_noisy);
  CHECK(a.query_y_clean == a.query_y_noisy);  // query untouched under context_only
  for (Eigen::Index i = 0; i < 9; ++i) {
    const bool f = a.flip_mask[static_cast<std::size_t>(i)];
    CHECK(a.context_y_noisy[i] == (f ? -a.context_y_clean[i] : a.context_y_clean[i]));
  }
  const Task other = sample_task(c, BatchRole::validation, 4, 2);
  CHECK(other.mu != a.mu);
  const Task next_step = sample_task(c, BatchRole::train, 5, 2);
  CHECK(next_step.mu != a.mu);
}

TEST_CASE("noise scope none leaves labels clean") {
  auto c = testing::small_config(3, 50, 20);
  c.noise = {0.4, NoiseScope::none};
  const auto batch = sample_task_batch(c, BatchRole::train, 0);
  for (const auto& t : batch.tasks) {
    CHECK(t.context_y_clean == t.context_y_noisy);
    CHECK(t.query_y_clean == t.query_y_noisy);
  }
}

TEST_CASE("context_and_query flips queries at rate epsilon") {
  auto c = testing::small_config(2, 1, 20000);
  c.noise = {0.2, NoiseScope::context_and_query};
  const auto batch = sample_task_batch(c, BatchRole::validation, 0);
  int flips = 0;
  for (const auto& t : batch.tasks) flips += t.query_y_clean != t.query_y_noisy;
  const double sd = std::sqrt(20000 * 0.2 * 0.8);
  CHECK(std::abs(flips - 4000.0) < 4.5 * sd);
}

TEST_CASE("mu_hat is an unbiased estimate of (1 - 2 eps) mu") {
  // Monte-Carlo: E[<mu_hat, mu>] / R^2 = 1 - 2 eps and E|mu_hat - (1-2eps) mu|^2
  // = d/N + (1 - (1-2eps)^2) R^2 / N.
  for (double eps : {0.0, 0.2, 0.4}) {
    auto c = testing::small_config(8, 10, 4000);
    c.signal = SignalRegime::fixed(3.0);
    c.noise = {eps, NoiseScope::context_only};
    const auto batch = sample_task_batch(c, BatchRole::train, 1);
    const auto s = summarize(batch);
    const double a = 1 - 2 * eps;
    double proj = 0, resid = 0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
      const Eigen::VectorXd mu = batch.tasks[t].mu;
      const Eigen::VectorXd mh = s.context_means.row(static_cast<Eigen::Index>(t)).transpose();
      proj += mh.dot(mu) / 9.0;
      resid += (mh - a * mu).squaredNorm();
    }
    proj /= batch.size();
    resid /= batch.size();
    const double expect_resid = 8.0 / 10 + (1 - a * a) * 9.0 / 10;
    CHECK(std::abs(proj - a) < 0.03);
    CHECK(resid == doctest::Approx(expect_resid).epsilon(0.05));
  }
}

TEST_CASE("summary sampler shares mu and query labels with the full sampler") {
  auto c = testing::small_config(6, 12, 50);
  c.noise = {0.2, NoiseScope::context_and_query};
  const auto full = summarize(sample_task_batch(c, BatchRole::train, 3));
  const auto fast = sample_query_summary(c, BatchRole::train, 3);
  CHECK(full.query_labels == fast.query_labels);
  CHECK(full.query_labels_clean == fast.query_labels_clean);
  CHECK(fast.context_means.rows() == 50);
  CHECK(fast.query_x.cols() == 6);
}

TEST_CASE("summary sampler has the full sampler's distribution") {
  // Same oracle moments as the unbiasedness check, plus the query input
  // second moment E|x_q|^2 = R^2 + d.
  auto c = testing::small_config(8, 10, 6000);
  c.signal = SignalRegime::fixed(3.0);
  c.noise = {0.3, NoiseScope::context_only};
  const auto s = sample_query_summary(c, BatchRole::train, 0);
  const double a = 1 - 2 * 0.3;
  double resid_norm = 0, xq = 0, align = 0;
  for (Eigen::Index t = 0; t < s.context_means.rows(); ++t) {
    const Eigen::VectorXd mh = s.context_means.row(t);
    const Eigen::VectorXd x = s.query_x.row(t);
    xq += x.squaredNorm();
    // mu is not exposed; y_q x_q - g = mu, so E[<mu_hat, y_q x_q>] = a R^2.
    align += s.query_labels_clean[t] * mh.dot(x);
    resid_norm += mh.squaredNorm();
  }
  const double bsz = static_cast<double>(s.context_means.rows());
  CHECK(xq / bsz == doctest::Approx(9.0 + 8.0).epsilon(0.03));
  CHECK(align / bsz == doctest::Approx(a * 9.0).epsilon(0.08));
  // E|mu_hat|^2 = E[(N-2F)^2]/N^2 R^2 + d/N.
  const double ef = 10 * 0.3, vf = 10 * 0.3 * 0.7;
  const double e_sq = (100 - 4 * 10 * ef + 4 * (vf + ef * ef)) / 100.0;
  CHECK(resid_norm / bsz == doctest::Approx(e_sq * 9.0 + 0.8).epsilon(0.04));
}
