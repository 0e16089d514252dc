#include <doctest.h>

#include <fstream>

#include "iclab/errors.hpp"
#include "iclab/reporting.hpp"
#include "test_support.hpp"

using namespace iclab;

namespace {

Trajectory sample_trajectory() {
  auto c = testing::small_config(4, 5, 10);
  c.max_steps = 11;
  return train_run(c, 2);
}

}  // namespace

TEST_CASE("trajectory CSV schema and exact round trip") {
  const auto t = sample_trajectory();
  const auto csv = trajectory_csv(t);
  CHECK(csv.starts_with("# config_fingerprint=" + config_fingerprint(t.config) + "\n"));
  CHECK(csv.find("step,train_accuracy,validation_accuracy,in_context_accuracy,mean_query_loss\n") !=
        std::string::npos);
  const auto parsed = parse_trajectory_csv(csv);
  CHECK(parsed.config_fingerprint == config_fingerprint(t.config));
  CHECK(parsed.records == t.records);
}

TEST_CASE("CSV parse errors") {
  CHECK_THROWS(parse_trajectory_csv("step,train_accuracy\n1,2\n"));
  CHECK_THROWS(parse_trajectory_csv(
      "step,train_accuracy,validation_accuracy,in_context_accuracy,mean_query_loss\n0,0.5,abc,0.5,0.6\n"));
}

TEST_CASE("run artifacts round trip through read_run") {
  testing::TempDir dir;
  const auto t = sample_trajectory();
  const auto paths = write_run_artifacts(t, dir.path() / "run", {{"b_reduced_from", 1000}});
  CHECK(std::filesystem::exists(paths.csv));
  const auto back = read_run(dir.path() / "run");
  CHECK(back.records == t.records);
  CHECK(config_fingerprint(back.config) == config_fingerprint(t.config));
  CHECK(back.seed == t.seed);
  CHECK(back.best_validation_accuracy == t.best_validation_accuracy);

  const auto manifest = run_manifest(t, {{"b_reduced_from", 1000}});
  CHECK(manifest.at("config_fingerprint") == config_fingerprint(t.config));
  CHECK(manifest.at("recipe_fingerprint") == recipe_fingerprint(t.config));
  CHECK(manifest.at("notes").at("b_reduced_from") == 1000);
  CHECK(manifest.at("train_sampling") == "full");
  CHECK(manifest.at("signal_magnitude").get<double>() == t.config.signal_magnitude());
}

TEST_CASE("read_run detects a manifest that does not match the trajectory") {
  testing::TempDir dir;
  const auto t = sample_trajectory();
  write_run_artifacts(t, dir.path());
  auto other = t;
  other.config.d = 99;
  std::ofstream(dir.path() / "trajectory.csv") << trajectory_csv(other);
  CHECK_THROWS(read_run(dir.path()));
  CHECK_THROWS_AS(read_run(dir.path() / "nope"), IoError);
}

TEST_CASE("sweep row JSON round trip and results table") {
  SweepRow r;
  r.axis1_index = 1;
  r.axis2_index = 2;
  r.config = testing::small_config();
  r.seed = 11;
  r.best_validation_accuracy = 0.97;
  r.step_to_near_optimal = 40;
  r.final_record = {99, 0.9, 0.95, 0.8, 0.12};
  r.run_directory = "runs/abc";
  const auto back = sweep_row_from_json(to_json(r));
  CHECK(back.final_record == r.final_record);
  CHECK(back.step_to_near_optimal == 40);
  CHECK(back.run_directory == "runs/abc");
  CHECK(config_fingerprint(back.config) == config_fingerprint(r.config));

  SweepRow failed = r;
  failed.failed = true;
  failed.diagnostic = "diverged, at \"step\" 3";
  failed.step_to_near_optimal.reset();
  const auto table = results_table_csv({r, failed});
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  CHECK_FALSE(sweep_row_from_json(to_json(failed)).step_to_near_optimal.has_value());
  CHECK(sweep_row_from_json(to_json(failed)).diagnostic == failed.diagnostic);
}

TEST_CASE("batch dump carries labels and flips") {
  auto c = testing::small_config(3, 4, 2);
  c.noise = {0.3, NoiseScope::context_only};
  const auto batch = sample_task_batch(c, BatchRole::validation, 0);
  const auto j = to_json(batch);
  CHECK(j.at("tasks").size() == 2);
  CHECK(j.at("tasks")[0].at("context_x").size() == 4);
  CHECK(j.at("tasks")[0].at("flip_mask").size() == 4);
  CHECK(j.at("role") == "validation");
  CHECK(j.at("tasks")[1].at("query_y_clean").get<int>() == batch.tasks[1].query_y_clean);
}
