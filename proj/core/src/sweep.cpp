#include "iclab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "iclab/errors.hpp"
#include "iclab/reporting.hpp"

namespace iclab {

std::string_view to_string(SweepParameter p) noexcept {
  switch (p) {
    case SweepParameter::d:
      return "d";
    case SweepParameter::n:
      return "N";
    case SweepParameter::b:
      return "B";
    case SweepParameter::epsilon:
      return "epsilon";
    case SweepParameter::r:
      return "R";
    case SweepParameter::signal_kind:
      return "signal.kind";
    case SweepParameter::noise_scope:
      return "noise.scope";
  }
  return "?";
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "d") return SweepParameter::d;
  if (name == "N" || name == "n") return SweepParameter::n;
  if (name == "B" || name == "b") return SweepParameter::b;
  if (name == "epsilon" || name == "eps") return SweepParameter::epsilon;
  if (name == "R" || name == "r") return SweepParameter::r;
  if (name == "signal.kind") return SweepParameter::signal_kind;
  if (name == "noise.scope") return SweepParameter::noise_scope;
  throw ConfigError("unknown sweep parameter '" + std::string(name) + "'");
}

std::string format_value(const SweepValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", std::get<double>(v));
  return buf;
}

bool same_value(const SweepValue& a, const SweepValue& b) noexcept {
  if (a.index() != b.index()) return false;
  if (const auto* s = std::get_if<std::string>(&a)) return *s == std::get<std::string>(b);
  const double x = std::get<double>(a);
  const double y = std::get<double>(b);
  return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
}

namespace {

double numeric(const SweepValue& v, SweepParameter p) {
  const auto* x = std::get_if<double>(&v);
  if (!x) throw ConfigError("sweep parameter " + std::string(to_string(p)) + " needs numeric values");
  return *x;
}

const std::string& text(const SweepValue& v, SweepParameter p) {
  const auto* s = std::get_if<std::string>(&v);
  if (!s) throw ConfigError("sweep parameter " + std::string(to_string(p)) + " needs string values");
  return *s;
}

std::size_t count(const SweepValue& v, SweepParameter p) {
  const double x = numeric(v, p);
  if (!(x >= 1.0) || std::floor(x) != x) {
    throw ConfigError("sweep parameter " + std::string(to_string(p)) + " needs positive integers");
  }
  return static_cast<std::size_t>(x);
}

}  // namespace

TaskConfig apply_parameter(const TaskConfig& config, SweepParameter parameter, const SweepValue& value) {
  TaskConfig c = config;
  switch (parameter) {
    case SweepParameter::d:
      c.d = count(value, parameter);
      break;
    case SweepParameter::n:
      c.n = count(value, parameter);
      break;
    case SweepParameter::b:
      c.b = count(value, parameter);
      break;
    case SweepParameter::epsilon:
      c.noise.epsilon = numeric(value, parameter);
      if (c.noise.scope == NoiseScope::none && c.noise.epsilon > 0.0) {
        c.noise.scope = NoiseScope::context_only;
      }
      break;
    case SweepParameter::r:
      c.signal = SignalRegime::fixed(numeric(value, parameter));
      break;
    case SweepParameter::signal_kind:
      c.signal.kind = parse_signal_kind(text(value, parameter));
      break;
    case SweepParameter::noise_scope:
      c.noise.scope = parse_noise_scope(text(value, parameter));
      break;
  }
  return c;
}

SweepValue parameter_value(const TaskConfig& c, SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::d:
      return static_cast<double>(c.d);
    case SweepParameter::n:
      return static_cast<double>(c.n);
    case SweepParameter::b:
      return static_cast<double>(c.b);
    case SweepParameter::epsilon:
      return c.noise.epsilon;
    case SweepParameter::r:
      return c.signal_magnitude();
    case SweepParameter::signal_kind:
      return std::string(to_string(c.signal.kind));
    case SweepParameter::noise_scope:
      return std::string(to_string(c.noise.scope));
  }
  return 0.0;
}

std::vector<TaskConfig> SweepSpec::grid() const {
  std::vector<TaskConfig> out;
  out.reserve(cell_count());
  for (const auto& v1 : axis1.values) {
    const TaskConfig c1 = apply_parameter(base, axis1.parameter, v1);
    if (!axis2) {
      out.push_back(c1);
      continue;
    }
    for (const auto& v2 : axis2->values) out.push_back(apply_parameter(c1, axis2->parameter, v2));
  }
  return out;
}

void SweepSpec::validate() const {
  if (axis1.values.empty()) throw ConfigError("sweep axis1 has no values");
  if (axis2 && axis2->values.empty()) throw ConfigError("sweep axis2 has no values");
  if (axis2 && axis2->parameter == axis1.parameter) throw ConfigError("sweep axes must differ");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  for (const auto& c : grid()) c.validate();
}

namespace {

SweepAxis axis_from_json(const nlohmann::json& j) {
  SweepAxis axis;
  axis.parameter = parse_sweep_parameter(j.at("parameter").get<std::string>());
  for (const auto& v : j.at("values")) {
    if (v.is_string()) {
      axis.values.emplace_back(v.get<std::string>());
    } else if (v.is_number()) {
      axis.values.emplace_back(v.get<double>());
    } else {
      throw ConfigError("sweep values must be numbers or strings");
    }
  }
  return axis;
}

nlohmann::json axis_to_json(const SweepAxis& axis) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : axis.values) {
    if (const auto* s = std::get_if<std::string>(&v)) {
      values.push_back(*s);
    } else {
      values.push_back(std::get<double>(v));
    }
  }
  return {{"parameter", to_string(axis.parameter)}, {"values", values}};
}

ContextMode parse_mode(const std::string& s) {
  if (s == "include_self") return ContextMode::include_self;
  if (s == "leave_one_out") return ContextMode::leave_one_out;
  throw ConfigError("unknown icl_mode '" + s + "'");
}

LabelSource parse_source(const std::string& s) {
  if (s == "noisy") return LabelSource::noisy;
  if (s == "clean") return LabelSource::clean;
  throw ConfigError("unknown icl_labels '" + s + "'");
}

TrainSampling parse_sampling(const std::string& s) {
  if (s == "full") return TrainSampling::full;
  if (s == "summary") return TrainSampling::summary;
  throw ConfigError("unknown train_sampling '" + s + "'");
}

}  // namespace

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
  SweepSpec spec;
  try {
    spec.base = task_config_from_json(j.at("base"));
    spec.axis1 = axis_from_json(j.at("axis1"));
    if (j.contains("axis2") && !j.at("axis2").is_null()) spec.axis2 = axis_from_json(j.at("axis2"));
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    spec.train_options.icl_mode = parse_mode(j.value("icl_mode", "include_self"));
    spec.train_options.icl_label_source = parse_source(j.value("icl_labels", "noisy"));
    spec.train_options.sampling = parse_sampling(j.value("train_sampling", "full"));
    spec.train_options.near_optimal_threshold = j.value("near_optimal_threshold", 0.99);
    spec.train_options.stop_on_plateau = j.value("stop_on_plateau", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sweep spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const SweepSpec& spec) {
  nlohmann::json j;
  j["base"] = to_json(spec.base);
  j["axis1"] = axis_to_json(spec.axis1);
  if (spec.axis2) j["axis2"] = axis_to_json(*spec.axis2);
  j["seeds"] = spec.seeds;
  j["icl_mode"] = to_string(spec.train_options.icl_mode);
  j["icl_labels"] = to_string(spec.train_options.icl_label_source);
  j["train_sampling"] = to_string(spec.train_options.sampling);
  j["near_optimal_threshold"] = spec.train_options.near_optimal_threshold;
  j["stop_on_plateau"] = spec.train_options.stop_on_plateau;
  return j;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("sweep spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return sweep_spec_from_json(j);
}

SweepResults run_sweep(const SweepSpec& spec, const SweepRunOptions& options) {
  spec.validate();
  const std::vector<TaskConfig> grid = spec.grid();
  const std::size_t axis2_size = spec.axis2 ? spec.axis2->values.size() : 1;

  struct WorkItem {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<WorkItem> work;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    for (auto seed : spec.seeds) work.push_back({cell, seed});
  }

  SweepResults results;
  results.rows.resize(work.size());
  results.trajectories.resize(work.size());

  std::mutex writer;
  std::atomic<std::size_t> next{0};
  TrainOptions train_options = spec.train_options;
  train_options.on_record = nullptr;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      const auto [cell, seed] = work[i];
      SweepRow row;
      row.axis1_index = cell / axis2_size;
      row.axis2_index = cell % axis2_size;
      row.seed = seed;
      row.config = grid[cell].with_seed(seed);
      row.run_directory = "runs/" + config_fingerprint(row.config);
      Trajectory traj;
      try {
        traj = train_run(grid[cell], seed, train_options);
        row.best_validation_accuracy = traj.best_validation_accuracy;
        row.step_to_near_optimal = traj.step_to_near_optimal;
        row.final_record = traj.final_record();
      } catch (const std::exception& e) {
        row.failed = true;
        row.diagnostic = e.what();
        traj.config = row.config;
        traj.seed = seed;
      }
      std::lock_guard lock(writer);
      if (options.out_dir && !row.failed) {
        write_run_artifacts(traj, *options.out_dir / row.run_directory);
      }
      results.rows[i] = row;
      results.trajectories[i] = std::move(traj);
      if (options.on_row) options.on_row(results.rows[i]);
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(work.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (options.out_dir) write_sweep_results(*options.out_dir, spec, results.rows);
  return results;
}

namespace {

MetricSeries series(const std::vector<Trajectory>& runs, double EvalRecord::*field) {
  const std::size_t steps = runs.front().records.size();
  MetricSeries s;
  s.mean.assign(steps, 0.0);
  s.sd.assign(steps, 0.0);
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < steps; ++i) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r.records[i].*field;
    const double mean = sum / k;
    double ss = 0.0;
    for (const auto& r : runs) {
      const double dev = r.records[i].*field - mean;
      ss += dev * dev;
    }
    s.mean[i] = mean;
    s.sd[i] = runs.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  }
  return s;
}

}  // namespace

AggregatedTrajectory aggregate_seeds(const std::vector<Trajectory>& runs) {
  if (runs.empty()) throw AggregationError("aggregate_seeds: no runs");
  const std::string recipe = recipe_fingerprint(runs.front().config);
  for (const auto& r : runs) {
    if (recipe_fingerprint(r.config) != recipe) {
      throw AggregationError("aggregate_seeds: runs have different configurations");
    }
    if (r.records.size() != runs.front().records.size()) {
      throw AggregationError("aggregate_seeds: runs have different evaluation schedules");
    }
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      if (r.records[i].step != runs.front().records[i].step) {
        throw AggregationError("aggregate_seeds: runs have different evaluation schedules");
      }
    }
  }
  AggregatedTrajectory agg;
  agg.config = runs.front().config;
  agg.runs = runs.size();
  for (const auto& rec : runs.front().records) agg.steps.push_back(rec.step);
  agg.train_accuracy = series(runs, &EvalRecord::train_accuracy);
  agg.validation_accuracy = series(runs, &EvalRecord::validation_accuracy);
  agg.in_context_accuracy = series(runs, &EvalRecord::in_context_accuracy);
  agg.mean_query_loss = series(runs, &EvalRecord::mean_query_loss);
  return agg;
}

std::string_view to_string(RegimeLabel label) noexcept {
  switch (label) {
    case RegimeLabel::underfitting:
      return "underfitting";
    case RegimeLabel::classical_overfitting:
      return "classical_overfitting";
    case RegimeLabel::benign_overfitting:
      return "benign_overfitting";
    case RegimeLabel::indeterminate:
      return "indeterminate";
  }
  return "?";
}

void RegimeThresholds::validate() const {
  if (!(0.5 < low_val && low_val < high_icl && high_icl <= 1.0 && high_val_fraction <= 1.0 &&
        high_val_fraction > 0.0)) {
    throw ConfigError("regime thresholds must satisfy 0.5 < low_val < high_icl <= 1");
  }
}

RegimeLabel classify_regime(const EvalRecord& m, double epsilon_query, const RegimeThresholds& th) {
  const double attainable = 1.0 - epsilon_query;
  const bool high_icl = m.in_context_accuracy >= th.high_icl;
  const bool high_val = m.validation_accuracy >= th.high_val_fraction * attainable;
  const bool low_val = m.validation_accuracy <= th.low_val;
  if (high_icl && high_val) return RegimeLabel::benign_overfitting;
  if (high_icl && low_val) return RegimeLabel::classical_overfitting;
  if (!high_icl && low_val) return RegimeLabel::underfitting;
  return RegimeLabel::indeterminate;
}

RegimeLabel majority_regime(const std::vector<RegimeLabel>& labels) {
  if (labels.empty()) return RegimeLabel::indeterminate;
  std::map<RegimeLabel, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  RegimeLabel best = RegimeLabel::indeterminate;
  std::size_t best_count = 0;
  bool tie = false;
  for (const auto& [label, n] : counts) {
    if (n > best_count) {
      best = label;
      best_count = n;
      tie = false;
    } else if (n == best_count) {
      tie = true;
    }
  }
  return tie ? RegimeLabel::indeterminate : best;
}

namespace {

std::size_t index_of(const std::vector<SweepValue>& values, const SweepValue& v) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (same_value(values[i], v)) return i;
  }
  return values.size();
}

}  // namespace

PhaseDiagram build_phase_diagram(const std::vector<SweepRow>& rows, SweepParameter axis_x,
                                 SweepParameter axis_y, const RegimeThresholds& thresholds) {
  std::vector<SweepValue> xs;
  std::vector<SweepValue> ys;
  for (const auto& r : rows) {
    const auto x = parameter_value(r.config, axis_x);
    const auto y = parameter_value(r.config, axis_y);
    if (index_of(xs, x) == xs.size()) xs.push_back(x);
    if (index_of(ys, y) == ys.size()) ys.push_back(y);
  }
  return build_phase_diagram(rows, axis_x, std::move(xs), axis_y, std::move(ys), thresholds);
}

PhaseDiagram build_phase_diagram(const std::vector<SweepRow>& rows, SweepParameter axis_x,
                                 std::vector<SweepValue> x_values, SweepParameter axis_y,
                                 std::vector<SweepValue> y_values, const RegimeThresholds& thresholds) {
  thresholds.validate();
  if (axis_x == axis_y) throw ConfigError("phase diagram axes must differ");
  PhaseDiagram pd;
  pd.axis_x = axis_x;
  pd.axis_y = axis_y;
  pd.x_values = std::move(x_values);
  pd.y_values = std::move(y_values);

  std::vector<std::vector<std::vector<const SweepRow*>>> members(
      pd.y_values.size(), std::vector<std::vector<const SweepRow*>>(pd.x_values.size()));
  for (const auto& r : rows) {
    if (r.failed) continue;
    const auto xi = index_of(pd.x_values, parameter_value(r.config, axis_x));
    const auto yi = index_of(pd.y_values, parameter_value(r.config, axis_y));
    if (xi < pd.x_values.size() && yi < pd.y_values.size()) members[yi][xi].push_back(&r);
  }

  pd.cells.assign(pd.y_values.size(), std::vector<PhaseCell>(pd.x_values.size()));
  for (std::size_t yi = 0; yi < pd.y_values.size(); ++yi) {
    for (std::size_t xi = 0; xi < pd.x_values.size(); ++xi) {
      const auto& runs = members[yi][xi];
      PhaseCell& cell = pd.cells[yi][xi];
      if (runs.empty()) continue;
      cell.present = true;
      cell.runs = runs.size();
      std::vector<RegimeLabel> labels;
      for (const SweepRow* r : runs) {
        labels.push_back(classify_regime(r->final_record, r->config.noise.query_epsilon(), thresholds));
        cell.mean_validation_accuracy += r->final_record.validation_accuracy;
        cell.mean_in_context_accuracy += r->final_record.in_context_accuracy;
      }
      cell.mean_validation_accuracy /= static_cast<double>(runs.size());
      cell.mean_in_context_accuracy /= static_cast<double>(runs.size());
      cell.regime = majority_regime(labels);
    }
  }
  return pd;
}

}  // namespace iclab
