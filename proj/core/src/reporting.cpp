#include "iclab/reporting.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "iclab/errors.hpp"
#include "io_util.hpp"

namespace iclab {

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json to_json(const Task& task) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < task.context_x.rows(); ++i) rows.push_back(vec_json(task.context_x.row(i).transpose()));
  nlohmann::json flips = nlohmann::json::array();
  for (bool f : task.flip_mask) flips.push_back(f);
  return {{"mu", vec_json(task.mu)},
          {"context_x", std::move(rows)},
          {"context_y_clean", vec_json(task.context_y_clean)},
          {"context_y_noisy", vec_json(task.context_y_noisy)},
          {"flip_mask", std::move(flips)},
          {"query_x", vec_json(task.query_x)},
          {"query_y_clean", task.query_y_clean},
          {"query_y_noisy", task.query_y_noisy}};
}

nlohmann::json to_json(const TaskBatch& batch) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : batch.tasks) tasks.push_back(to_json(t));
  return {{"config_fingerprint", batch.config_fingerprint},
          {"role", std::string(to_string(batch.role))},
          {"step", batch.step_index},
          {"tasks", std::move(tasks)}};
}

namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw IoError("trajectory CSV line " + std::to_string(line) + ": bad number '" +
                  std::string(field) + "'");
  }
  return v;
}

constexpr std::string_view kFingerprintPrefix = "# config_fingerprint=";
constexpr std::string_view kHeader =
    "step,train_accuracy,validation_accuracy,in_context_accuracy,mean_query_loss";

}  // namespace

std::string trajectory_csv(const Trajectory& trajectory) {
  std::string out;
  out += kFingerprintPrefix;
  out += config_fingerprint(trajectory.config);
  out += '\n';
  out += kHeader;
  out += '\n';
  for (const auto& r : trajectory.records) {
    out += std::to_string(r.step);
    for (double v : {r.train_accuracy, r.validation_accuracy, r.in_context_accuracy, r.mean_query_loss}) {
      out += ',';
      out += real(v);
    }
    out += '\n';
  }
  return out;
}

TrajectoryCsv parse_trajectory_csv(std::string_view text) {
  TrajectoryCsv out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with(kFingerprintPrefix)) {
      out.config_fingerprint = std::string(line.substr(kFingerprintPrefix.size()));
      continue;
    }
    if (line.starts_with('#')) continue;
    if (!header_seen) {
      if (line != kHeader) throw IoError("trajectory CSV: unexpected header '" + std::string(line) + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) {
      throw IoError("trajectory CSV line " + std::to_string(line_no) + ": expected 5 fields");
    }
    EvalRecord r;
    long long step = 0;
    const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), step);
    if (ec != std::errc{} || ptr != fields[0].data() + fields[0].size()) {
      throw IoError("trajectory CSV line " + std::to_string(line_no) + ": bad step");
    }
    r.step = step;
    r.train_accuracy = parse_real(fields[1], line_no);
    r.validation_accuracy = parse_real(fields[2], line_no);
    r.in_context_accuracy = parse_real(fields[3], line_no);
    r.mean_query_loss = parse_real(fields[4], line_no);
    out.records.push_back(r);
  }
  if (!header_seen) throw IoError("trajectory CSV: missing header");
  return out;
}

TrajectoryCsv read_trajectory_csv(const std::filesystem::path& path) {
  return parse_trajectory_csv(detail::read_file(path));
}

nlohmann::json run_manifest(const Trajectory& t, const nlohmann::json& notes) {
  nlohmann::json j;
  j["config"] = to_json(t.config);
  j["config_fingerprint"] = config_fingerprint(t.config);
  j["recipe_fingerprint"] = recipe_fingerprint(t.config);
  j["seed"] = t.seed;
  j["signal_magnitude"] = t.config.signal_magnitude();
  j["best_validation_accuracy"] = t.best_validation_accuracy;
  j["step_to_near_optimal"] = t.step_to_near_optimal ? nlohmann::json(*t.step_to_near_optimal) : nlohmann::json();
  j["wall_time"] = t.wall_time_seconds;
  j["records"] = t.records.size();
  j["train_sampling"] = t.train_sampling;
  if (!notes.is_null()) j["notes"] = notes;
  return j;
}

RunArtifacts write_run_artifacts(const Trajectory& trajectory, const std::filesystem::path& out_dir,
                                 const nlohmann::json& notes) {
  RunArtifacts a{out_dir / kTrajectoryFile, out_dir / kManifestFile};
  detail::write_file_atomic(a.csv, trajectory_csv(trajectory));
  detail::write_file_atomic(a.manifest, run_manifest(trajectory, notes).dump(2) + "\n");
  return a;
}

Trajectory read_run(const std::filesystem::path& run_dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(detail::read_file(run_dir / kManifestFile));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + run_dir.string() + ": " + e.what());
  }
  Trajectory t;
  t.config = task_config_from_json(m.at("config"));
  t.seed = m.at("seed").get<std::uint64_t>();
  t.best_validation_accuracy = m.at("best_validation_accuracy").get<double>();
  if (!m.at("step_to_near_optimal").is_null()) {
    t.step_to_near_optimal = m.at("step_to_near_optimal").get<std::int64_t>();
  }
  t.wall_time_seconds = m.at("wall_time").get<double>();
  t.train_sampling = m.value("train_sampling", "full");
  auto csv = read_trajectory_csv(run_dir / kTrajectoryFile);
  if (csv.config_fingerprint != m.at("config_fingerprint").get<std::string>()) {
    throw IoError("run " + run_dir.string() + ": CSV fingerprint does not match the manifest");
  }
  t.records = std::move(csv.records);
  return t;
}

namespace {

nlohmann::json record_json(const EvalRecord& r) {
  return {{"step", r.step},
          {"train_accuracy", r.train_accuracy},
          {"validation_accuracy", r.validation_accuracy},
          {"in_context_accuracy", r.in_context_accuracy},
          {"mean_query_loss", r.mean_query_loss}};
}

EvalRecord record_from_json(const nlohmann::json& j) {
  return EvalRecord{j.at("step").get<std::int64_t>(), j.at("train_accuracy").get<double>(),
                    j.at("validation_accuracy").get<double>(), j.at("in_context_accuracy").get<double>(),
                    j.at("mean_query_loss").get<double>()};
}

}  // namespace

nlohmann::json to_json(const SweepRow& row) {
  nlohmann::json j;
  j["axis1_index"] = row.axis1_index;
  j["axis2_index"] = row.axis2_index;
  j["config"] = to_json(row.config);
  j["seed"] = row.seed;
  j["failed"] = row.failed;
  j["diagnostic"] = row.diagnostic;
  j["best_validation_accuracy"] = row.best_validation_accuracy;
  j["step_to_near_optimal"] =
      row.step_to_near_optimal ? nlohmann::json(*row.step_to_near_optimal) : nlohmann::json();
  j["final"] = record_json(row.final_record);
  j["run_directory"] = row.run_directory;
  return j;
}

SweepRow sweep_row_from_json(const nlohmann::json& j) {
  SweepRow row;
  row.axis1_index = j.at("axis1_index").get<std::size_t>();
  row.axis2_index = j.at("axis2_index").get<std::size_t>();
  row.config = task_config_from_json(j.at("config"));
  row.seed = j.at("seed").get<std::uint64_t>();
  row.failed = j.at("failed").get<bool>();
  row.diagnostic = j.at("diagnostic").get<std::string>();
  row.best_validation_accuracy = j.at("best_validation_accuracy").get<double>();
  if (!j.at("step_to_near_optimal").is_null()) {
    row.step_to_near_optimal = j.at("step_to_near_optimal").get<std::int64_t>();
  }
  row.final_record = record_from_json(j.at("final"));
  row.run_directory = j.at("run_directory").get<std::string>();
  return row;
}

std::string results_table_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "run_directory,config_fingerprint,seed,d,n,b,signal_kind,signal_value,signal_magnitude,"
         "epsilon,noise_scope,failed,best_validation_accuracy,step_to_near_optimal,final_step,"
         "final_train_accuracy,final_validation_accuracy,final_in_context_accuracy,"
         "final_mean_query_loss,diagnostic\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    std::string diag = r.diagnostic;
    for (char& ch : diag) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out << r.run_directory << ',' << config_fingerprint(c) << ',' << r.seed << ',' << c.d << ',' << c.n
        << ',' << c.b << ',' << to_string(c.signal.kind) << ',' << real(c.signal.parameter()) << ','
        << real(c.signal_magnitude()) << ',' << real(c.noise.epsilon) << ',' << to_string(c.noise.scope)
        << ',' << (r.failed ? 1 : 0) << ',' << real(r.best_validation_accuracy) << ','
        << (r.step_to_near_optimal ? std::to_string(*r.step_to_near_optimal) : std::string()) << ','
        << r.final_record.step << ',' << real(r.final_record.train_accuracy) << ','
        << real(r.final_record.validation_accuracy) << ',' << real(r.final_record.in_context_accuracy)
        << ',' << real(r.final_record.mean_query_loss) << ',' << diag << '\n';
  }
  return out.str();
}

void write_sweep_results(const std::filesystem::path& out_dir, const SweepSpec& spec,
                         const std::vector<SweepRow>& rows) {
  nlohmann::json j;
  j["spec"] = to_json(spec);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) j["rows"].push_back(to_json(r));
  detail::write_file_atomic(out_dir / "sweep.json", j.dump(2) + "\n");
  detail::write_file_atomic(out_dir / "results.csv", results_table_csv(rows));
}

std::vector<SweepRow> read_sweep_rows(const std::filesystem::path& out_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(out_dir / "sweep.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sweep.json in " + out_dir.string() + ": " + e.what());
  }
  std::vector<SweepRow> rows;
  for (const auto& r : j.at("rows")) rows.push_back(sweep_row_from_json(r));
  return rows;
}

}  // namespace iclab
