#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iclab/sweep.hpp"
#include "iclab/trainer.hpp"

namespace iclab {

// Trajectory CSV: a "# config_fingerprint=<hex>" line, then the header
// step,train_accuracy,validation_accuracy,in_context_accuracy,mean_query_loss
// and one row per EvalRecord. Reals are printed with 17 significant digits
// so the file round-trips exactly.
// Full dump of a batch (inputs, clean and noisy labels, flip masks) for inspection.
nlohmann::json to_json(const Task& task);
nlohmann::json to_json(const TaskBatch& batch);

std::string trajectory_csv(const Trajectory& trajectory);

struct TrajectoryCsv {
  std::string config_fingerprint;
  std::vector<EvalRecord> records;
};

TrajectoryCsv parse_trajectory_csv(std::string_view text);
TrajectoryCsv read_trajectory_csv(const std::filesystem::path& path);

// {config, config_fingerprint, recipe_fingerprint, seed, best_validation_accuracy,
//  step_to_near_optimal, wall_time, records, train_sampling, notes?}
nlohmann::json run_manifest(const Trajectory& trajectory, const nlohmann::json& notes = nullptr);

struct RunArtifacts {
  std::filesystem::path csv;
  std::filesystem::path manifest;
};

inline constexpr std::string_view kTrajectoryFile = "trajectory.csv";
inline constexpr std::string_view kManifestFile = "manifest.json";

// Writes trajectory.csv and manifest.json under `out_dir`, each atomically.
RunArtifacts write_run_artifacts(const Trajectory& trajectory, const std::filesystem::path& out_dir,
                                 const nlohmann::json& notes = nullptr);

// Rebuilds a Trajectory from a directory written by write_run_artifacts.
Trajectory read_run(const std::filesystem::path& run_dir);

nlohmann::json to_json(const SweepRow& row);
SweepRow sweep_row_from_json(const nlohmann::json& j);

std::string results_table_csv(const std::vector<SweepRow>& rows);

// sweep.json: {"spec": ..., "rows": [...]}
void write_sweep_results(const std::filesystem::path& out_dir, const SweepSpec& spec,
                         const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_rows(const std::filesystem::path& out_dir);

}  // namespace iclab
