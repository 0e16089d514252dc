#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iclab/sweep.hpp"
#include "iclab/trainer.hpp"

namespace iclab {

enum class PlotKind { trajectory, phase };
enum class Metric { train_accuracy, validation_accuracy, in_context_accuracy, mean_query_loss };

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view name);
// Legend colour used for a metric's polyline.
std::string_view metric_color(Metric m) noexcept;
std::string_view regime_color(RegimeLabel label) noexcept;

struct PlotSpec {
  PlotKind kind = PlotKind::trajectory;
  std::vector<Metric> series{Metric::train_accuracy, Metric::validation_accuracy,
                             Metric::in_context_accuracy};
  // Placeholders: {d} {n} {b} {r} {signal} {epsilon} {scope} {seed}.
  std::string title = "Model Performance (d={d}, N={n}, B={b}, R={r})";
  std::string x_label = "training step";
  std::string y_label = "accuracy";
  std::filesystem::path output;
};

std::string format_title(const std::string& title_template, const TaskConfig& config);

// Trajectory plots draw one polyline per selected metric plus a legend.
// Throws EmptyDataError when there are no records.
std::string emit_trajectory_plot(const PlotSpec& spec, const Trajectory& trajectory);
// Seed-mean lines with +-1 sd bands.
std::string emit_trajectory_plot(const PlotSpec& spec, const AggregatedTrajectory& aggregate);
// One rect per grid cell coloured by regime, plus a legend. Empty axis labels
// fall back to the parameter names.
std::string emit_phase_plot(const PlotSpec& spec, const PhaseDiagram& diagram);

// Writes `svg` to spec.output atomically.
void write_plot(const PlotSpec& spec, const std::string& svg);

}  // namespace iclab
