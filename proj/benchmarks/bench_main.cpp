#include <benchmark/benchmark.h>

#include "iclab/linear_model.hpp"
#include "iclab/prompt.hpp"
#include "iclab/task_generator.hpp"
#include "iclab/trainer.hpp"

namespace {

iclab::TaskConfig config(std::size_t d, std::size_t n, std::size_t b) {
  iclab::TaskConfig c;
  c.d = d;
  c.n = n;
  c.b = b;
  c.signal = iclab::SignalRegime::constant(6.45);
  c.noise = {0.2, iclab::NoiseScope::context_only};
  return c;
}

void BM_SampleBatch(benchmark::State& state) {
  const auto c = config(static_cast<std::size_t>(state.range(0)), 20, 256);
  std::int64_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(iclab::sample_task_batch(c, iclab::BatchRole::train, step++));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SampleBatch)->Arg(50)->Arg(500);

void BM_SampleSummary(benchmark::State& state) {
  const auto c = config(static_cast<std::size_t>(state.range(0)), 20, 256);
  std::int64_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(iclab::sample_query_summary(c, iclab::BatchRole::train, step++));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SampleSummary)->Arg(50)->Arg(500);

void BM_Gradient(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto summary = iclab::sample_query_summary(config(static_cast<std::size_t>(d), 20, 1000),
                                                   iclab::BatchRole::train, 0);
  const iclab::LinearModel model(Eigen::MatrixXd::Identity(d, d) * 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(iclab::batch_loss_and_gradient(model, summary));
}
BENCHMARK(BM_Gradient)->Arg(50)->Arg(500);

void BM_Evaluate(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto batch = iclab::sample_task_batch(config(static_cast<std::size_t>(d), 20, 500),
                                              iclab::BatchRole::validation, 0);
  const iclab::LinearModel model(Eigen::MatrixXd::Identity(d, d));
  for (auto _ : state) benchmark::DoNotOptimize(iclab::evaluate(model, batch));
}
BENCHMARK(BM_Evaluate)->Arg(50)->Arg(500);

void BM_Prompt(benchmark::State& state) {
  const auto task = iclab::sample_task(config(static_cast<std::size_t>(state.range(0)), 20, 1),
                                       iclab::BatchRole::validation, 0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(iclab::build_classification_prompt(task).text());
}
BENCHMARK(BM_Prompt)->Arg(4)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
