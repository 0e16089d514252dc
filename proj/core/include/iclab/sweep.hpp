#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "iclab/trainer.hpp"

namespace iclab {

enum class SweepParameter { d, n, b, epsilon, r, signal_kind, noise_scope };

std::string_view to_string(SweepParameter p) noexcept;
// Accepts "d", "N"/"n", "B"/"b", "epsilon", "R"/"r", "signal.kind", "noise.scope".
SweepParameter parse_sweep_parameter(std::string_view name);

// Numeric axes carry doubles, enum axes carry the enum's name.
using SweepValue = std::variant<double, std::string>;

std::string format_value(const SweepValue& v);
bool same_value(const SweepValue& a, const SweepValue& b) noexcept;

struct SweepAxis {
  SweepParameter parameter = SweepParameter::d;
  std::vector<SweepValue> values;
};

// Sets one parameter on a copy of `config`. Setting epsilon > 0 on a config
// whose scope is none switches the scope to context_only; setting R switches
// the signal to an explicit magnitude.
TaskConfig apply_parameter(const TaskConfig& config, SweepParameter parameter, const SweepValue& value);
SweepValue parameter_value(const TaskConfig& config, SweepParameter parameter);

struct SweepSpec {
  TaskConfig base;
  SweepAxis axis1;
  std::optional<SweepAxis> axis2;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainOptions train_options;

  // Throws ConfigError on empty value lists, no seeds, or an invalid grid point.
  void validate() const;
  std::size_t cell_count() const noexcept {
    return axis1.values.size() * (axis2 ? axis2->values.size() : 1);
  }
  // Grid points in row-major (axis1 outer) order.
  std::vector<TaskConfig> grid() const;
};

// Spec file schema: {"base": <task config>, "axis1": {"parameter": "d",
// "values": [...]}, "axis2": {...}?, "seeds": [...]?, "icl_mode"?,
// "icl_labels"?, "train_sampling"?, "near_optimal_threshold"?}
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepSpec& spec);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct SweepRow {
  std::size_t axis1_index = 0;
  std::size_t axis2_index = 0;
  TaskConfig config;  // base_seed == seed
  std::uint64_t seed = 0;
  bool failed = false;
  std::string diagnostic;
  double best_validation_accuracy = 0.0;
  std::optional<std::int64_t> step_to_near_optimal;
  EvalRecord final_record;
  std::string run_directory;  // relative to the sweep output directory
};

struct SweepResults {
  std::vector<SweepRow> rows;          // one per (grid point, seed), grid order
  std::vector<Trajectory> trajectories;  // parallel to rows; empty records when failed
};

struct SweepRunOptions {
  unsigned workers = 1;
  // When set, every run's artifacts land under out_dir/runs/<fingerprint>/
  // and results.csv + sweep.json are written at the end.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const SweepRow&)> on_row;
};

SweepResults run_sweep(const SweepSpec& spec, const SweepRunOptions& options = {});

// Per-step seed statistics over runs that share a recipe.
struct MetricSeries {
  std::vector<double> mean;
  std::vector<double> sd;  // sample standard deviation; 0 for a single run
};

struct AggregatedTrajectory {
  TaskConfig config;
  std::size_t runs = 0;
  std::vector<std::int64_t> steps;
  MetricSeries train_accuracy;
  MetricSeries validation_accuracy;
  MetricSeries in_context_accuracy;
  MetricSeries mean_query_loss;
};

// Throws AggregationError on an empty input, mismatched recipes or
// mismatched evaluation steps.
AggregatedTrajectory aggregate_seeds(const std::vector<Trajectory>& runs);

enum class RegimeLabel { underfitting, classical_overfitting, benign_overfitting, indeterminate };

std::string_view to_string(RegimeLabel label) noexcept;

struct RegimeThresholds {
  double high_icl = 0.90;
  double high_val_fraction = 0.90;  // of the attainable maximum
  double low_val = 0.60;

  void validate() const;
};

// in_context_accuracy must be measured against noisy context labels.
RegimeLabel classify_regime(const EvalRecord& final_metrics, double epsilon_query,
                            const RegimeThresholds& thresholds = {});

// Plurality over seeds; ties and empty input give indeterminate.
RegimeLabel majority_regime(const std::vector<RegimeLabel>& labels);

struct PhaseCell {
  bool present = false;
  std::size_t runs = 0;
  RegimeLabel regime = RegimeLabel::indeterminate;
  double mean_validation_accuracy = 0.0;
  double mean_in_context_accuracy = 0.0;
};

struct PhaseDiagram {
  SweepParameter axis_x = SweepParameter::epsilon;
  SweepParameter axis_y = SweepParameter::d;
  std::vector<SweepValue> x_values;
  std::vector<SweepValue> y_values;
  std::vector<std::vector<PhaseCell>> cells;  // cells[y][x]

  const PhaseCell& at(std::size_t x, std::size_t y) const { return cells.at(y).at(x); }
};

// Axis values are taken from the rows in first-appearance order. Failed runs
// are ignored; cells without any completed run are marked absent.
PhaseDiagram build_phase_diagram(const std::vector<SweepRow>& rows, SweepParameter axis_x,
                                 SweepParameter axis_y, const RegimeThresholds& thresholds = {});

// Same, with explicit value lists (cells outside the rows stay absent).
PhaseDiagram build_phase_diagram(const std::vector<SweepRow>& rows, SweepParameter axis_x,
                                 std::vector<SweepValue> x_values, SweepParameter axis_y,
                                 std::vector<SweepValue> y_values,
                                 const RegimeThresholds& thresholds = {});

}  // namespace iclab
