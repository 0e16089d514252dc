#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iclab/errors.hpp"
#include "iclab/linear_model.hpp"
#include "iclab/prober.hpp"
#include "iclab/regression_baselines.hpp"
#include "iclab/reporting.hpp"
#include "iclab/svg_plot.hpp"
#include "iclab/sweep.hpp"
#include "iclab/task_config.hpp"
#include "iclab/trainer.hpp"

namespace fs = std::filesystem;
using namespace iclab;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

TrainSampling parse_sampling(const std::string& s) {
  if (s == "full") return TrainSampling::full;
  if (s == "summary") return TrainSampling::summary;
  throw ConfigError("--sampling must be full or summary");
}

ContextMode parse_icl_mode(const std::string& s) {
  if (s == "include_self") return ContextMode::include_self;
  if (s == "leave_one_out") return ContextMode::leave_one_out;
  throw ConfigError("--icl-mode must be include_self or leave_one_out");
}

struct GenerateArgs {
  std::string config;
  std::string role = "validation";
  std::int64_t step = 0;
  std::string out = "-";
};

int run_generate(const GenerateArgs& a) {
  const auto config = load_task_config(a.config);
  BatchRole role;
  if (a.role == "train") {
    role = BatchRole::train;
  } else if (a.role == "validation") {
    role = BatchRole::validation;
  } else {
    throw ConfigError("--role must be train or validation");
  }
  auto j = to_json(sample_task_batch(config, role, a.step));
  j["config"] = to_json(config);
  write_text(a.out, j.dump(1) + "\n");
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::string sampling = "full";
  std::string icl_mode = "include_self";
  std::string checkpoint;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const auto config = load_task_config(a.config);
  TrainOptions opts;
  opts.sampling = parse_sampling(a.sampling);
  opts.icl_mode = parse_icl_mode(a.icl_mode);
  if (!a.quiet) {
    opts.on_record = [](const EvalRecord& r) {
      std::fprintf(stderr, "step %5lld  train %.4f  val %.4f  icl %.4f  loss %.5f\n", static_cast<long long>(r.step),
                   r.train_accuracy, r.validation_accuracy, r.in_context_accuracy, r.mean_query_loss);
    };
  }
  const auto result = train(config, config.base_seed, opts);
  const auto& t = result.trajectory;
  const auto artifacts = write_run_artifacts(t, a.out);
  if (!a.checkpoint.empty()) {
    save_checkpoint(a.checkpoint, result.model,
                    {config.d, t.records.empty() ? 0 : t.final_record().step, config_fingerprint(config)});
  }
  std::cout << "wrote " << artifacts.csv.string() << " and " << artifacts.manifest.string() << "\n"
            << "best validation " << t.best_validation_accuracy << ", final in-context "
            << t.final_record().in_context_accuracy << ", " << t.wall_time_seconds << " s\n";
  return 0;
}

struct SweepArgs {
  std::string spec;
  std::string out;
  unsigned workers = 1;
};

int run_sweep_cmd(const SweepArgs& a) {
  const auto spec = load_sweep_spec(a.spec);
  SweepRunOptions opts;
  opts.workers = a.workers;
  opts.out_dir = a.out;
  std::size_t done = 0;
  const std::size_t total = spec.cell_count() * spec.seeds.size();
  opts.on_row = [&](const SweepRow& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s seed %llu: %s\n", done, total, r.run_directory.c_str(),
                 static_cast<unsigned long long>(r.seed),
                 r.failed ? ("FAILED " + r.diagnostic).c_str() : "ok");
  };
  const auto results = run_sweep(spec, opts);
  std::size_t failed = 0;
  for (const auto& r : results.rows) failed += r.failed ? 1 : 0;
  std::cout << "wrote " << (fs::path(a.out) / "results.csv").string() << " (" << results.rows.size() << " runs, "
            << failed << " failed)\n";
  return 0;
}

struct PhaseArgs {
  std::string in;
  std::string x = "epsilon";
  std::string y = "d";
  std::string svg;
};

PhaseDiagram load_phase(const std::string& dir, const std::string& x, const std::string& y) {
  return build_phase_diagram(read_sweep_rows(dir), parse_sweep_parameter(x), parse_sweep_parameter(y));
}

int run_phase(const PhaseArgs& a) {
  const auto diagram = load_phase(a.in, a.x, a.y);
  std::cout << a.y << " \\ " << a.x;
  for (const auto& v : diagram.x_values) std::cout << '\t' << format_value(v);
  std::cout << '\n';
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t yi = 0; yi < diagram.y_values.size(); ++yi) {
    std::cout << format_value(diagram.y_values[yi]);
    for (std::size_t xi = 0; xi < diagram.x_values.size(); ++xi) {
      const auto& c = diagram.at(xi, yi);
      std::cout << '\t' << (c.present ? to_string(c.regime) : std::string_view("-"));
      if (c.present) {
        cells.push_back({{"x", format_value(diagram.x_values[xi])},
                         {"y", format_value(diagram.y_values[yi])},
                         {"regime", to_string(c.regime)},
                         {"runs", c.runs},
                         {"mean_validation_accuracy", c.mean_validation_accuracy},
                         {"mean_in_context_accuracy", c.mean_in_context_accuracy}});
      }
    }
    std::cout << '\n';
  }
  write_text(fs::path(a.in) / "phase.json",
             nlohmann::json{{"x", a.x}, {"y", a.y}, {"cells", cells}}.dump(2) + "\n");
  if (!a.svg.empty()) {
    PlotSpec spec;
    spec.kind = PlotKind::phase;
    spec.title = "Training regime";
    spec.x_label = a.x;
    spec.y_label = a.y;
    spec.output = a.svg;
    write_plot(spec, emit_phase_plot(spec, diagram));
  }
  return 0;
}

struct PlotArgs {
  std::string run;
  std::string kind = "trajectory";
  std::string out;
  std::string title;
  std::string x = "epsilon";
  std::string y = "d";
  std::vector<std::string> metrics;
};

int run_plot(const PlotArgs& a) {
  PlotSpec spec;
  spec.output = a.out;
  if (!a.title.empty()) spec.title = a.title;
  if (a.kind == "trajectory") {
    if (!a.metrics.empty()) {
      spec.series.clear();
      for (const auto& m : a.metrics) spec.series.push_back(parse_metric(m));
    }
    const auto t = read_run(a.run);
    write_plot(spec, emit_trajectory_plot(spec, t));
  } else if (a.kind == "phase") {
    spec.kind = PlotKind::phase;
    if (a.title.empty()) spec.title = "Training regime";
    spec.x_label = a.x;
    spec.y_label = a.y;
    write_plot(spec, emit_phase_plot(spec, load_phase(a.run, a.x, a.y)));
  } else {
    throw ConfigError("--kind must be trajectory or phase");
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct ProbeArgs {
  std::string predictor;
  std::string config;
  bool loo = false;
  std::string out;
  std::string cache;
  std::string model;
  std::string api_key_env;
  bool replay = false;
  std::size_t concurrency = 4;
  int rate_ms = 0;
  int retries = 3;
  double timeout_s = 30.0;
};

int run_probe(const ProbeArgs& a) {
  const auto config = load_task_config(a.config);
  const fs::path out(a.out);
  const fs::path cache_dir = a.cache.empty() ? out / "cache" : fs::path(a.cache);

  std::shared_ptr<Predictor> backend;
  std::string model_id = a.model;
  if (!a.replay) {
    auto pspec = parse_predictor_target(a.predictor);
    if (!a.model.empty()) pspec.model_id = a.model;
    pspec.api_key_env = a.api_key_env;
    pspec.max_retries = a.retries;
    pspec.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000));
    backend = make_predictor(pspec);
    if (model_id.empty()) model_id = backend->model_id();
  } else if (model_id.empty()) {
    model_id = a.predictor;
  }
  CachedPredictor predictor(backend, cache_dir, model_id);

  ProbeOptions opts;
  opts.include_loo = a.loo;
  opts.concurrency = a.concurrency;
  opts.max_retries = a.retries;
  opts.min_request_interval = std::chrono::milliseconds(a.rate_ms);
  const auto batch = sample_task_batch(config, BatchRole::validation, 0);
  const auto metrics = evaluate_llm_batch(predictor, batch, opts);

  nlohmann::json j = {{"config", to_json(config)},
                      {"config_fingerprint", config_fingerprint(config)},
                      {"model", model_id},
                      {"include_loo", a.loo},
                      {"metrics", to_json(metrics)},
                      {"cache_hits", predictor.hits()},
                      {"backend_calls", predictor.backend_calls()}};
  write_text(out / "metrics.json", j.dump(2) + "\n");
  std::cout << "query_accuracy " << metrics.query_accuracy << "  icl_loo_accuracy " << metrics.icl_loo_accuracy
            << "  parse_failure_rate " << metrics.parse_failure_rate << "  (" << metrics.n_tasks << " tasks, "
            << predictor.hits() << " cached, " << predictor.backend_calls() << " requested)\n";
  return 0;
}

struct RegressArgs {
  std::string kind = "linear";
  std::size_t d = 4;
  std::vector<std::size_t> n{4, 8, 16, 32};
  double alpha = 1.0;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::string variant = "gd1";
  double lr = 1.0;
  double ridge = 0.0;
  std::string predictor;
  std::string cache;
};

int run_regress(const RegressArgs& a) {
  const auto kind = parse_regression_kind(a.kind);
  std::shared_ptr<CachedPredictor> llm;
  RegressionPredictor pred;
  std::string label;
  if (!a.predictor.empty()) {
    auto backend = make_predictor(parse_predictor_target(a.predictor));
    llm = std::make_shared<CachedPredictor>(backend, a.cache.empty() ? fs::path("probe-cache") : fs::path(a.cache));
    pred = llm_regression_predictor(*llm);
    label = llm->model_id();
  } else {
    const auto variant = parse_gd_variant(a.variant);
    pred = gd_predictor(variant, a.lr, a.ridge);
    label = std::string(to_string(variant));
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t n : a.n) {
    const auto tasks = sample_regression_tasks(kind, a.d, n, a.alpha, a.count, a.seed);
    const auto r = mse_eval(pred, tasks);
    rows.push_back({{"n", n}, {"mse", r.mse}, {"n_success", r.n_success}, {"n_failed", r.n_failed}});
  }
  const nlohmann::json j = {{"predictor", label}, {"kind", a.kind}, {"d", a.d},   {"alpha", a.alpha},
                            {"count", a.count},  {"seed", a.seed},  {"lr", a.lr}, {"ridge", a.ridge},
                            {"results", rows}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iclab: in-context classification experiments with a linear attention model"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Dump one sampled batch as JSON");
  g->add_option("--config", gen.config, "Task config (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--role", gen.role, "train or validation");
  g->add_option("--step", gen.step, "Step index of the batch");
  g->add_option("--out", gen.out, "Output file, - for stdout");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one run and write trajectory.csv + manifest.json");
  t->add_option("--config", tr.config, "Task config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--sampling", tr.sampling, "full or summary");
  t->add_option("--icl-mode", tr.icl_mode, "include_self or leave_one_out");
  t->add_option("--checkpoint", tr.checkpoint, "Write the final W here");
  t->add_flag("--quiet", tr.quiet, "No per-evaluation progress");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Run a parameter grid over seeds");
  s->add_option("--spec", sw.spec, "Sweep spec (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sw.out, "Output directory")->required();
  s->add_option("--workers", sw.workers, "Parallel runs")->check(CLI::PositiveNumber);

  PhaseArgs ph;
  auto* p = app.add_subcommand("phase", "Classify sweep cells into regimes");
  p->add_option("--in", ph.in, "Sweep output directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--x", ph.x, "Parameter on the x axis");
  p->add_option("--y", ph.y, "Parameter on the y axis");
  p->add_option("--svg", ph.svg, "Also render the diagram");

  PlotArgs pl;
  auto* pt = app.add_subcommand("plot", "Render an SVG figure");
  pt->add_option("--run", pl.run, "Run directory (trajectory) or sweep directory (phase)")
      ->required()
      ->check(CLI::ExistingDirectory);
  pt->add_option("--kind", pl.kind, "trajectory or phase");
  pt->add_option("--out", pl.out, "SVG path")->required();
  pt->add_option("--title", pl.title, "Title template; {d} {n} {b} {r} {signal} {epsilon} {scope} {seed}");
  pt->add_option("--metric", pl.metrics, "Series to draw (repeatable)");
  pt->add_option("--x", pl.x, "Phase x axis");
  pt->add_option("--y", pl.y, "Phase y axis");

  ProbeArgs pr;
  auto* pb = app.add_subcommand("probe", "Score an external predictor on few-shot classification prompts");
  pb->add_option("--predictor", pr.predictor, "http(s)://..., subprocess:<cmd>, builtin:centroid, builtin:constant:<x>")
      ->required();
  pb->add_option("--config", pr.config, "Task config (JSON)")->required()->check(CLI::ExistingFile);
  pb->add_flag("--loo", pr.loo, "Also ask every leave-one-out context label");
  pb->add_option("--out", pr.out, "Output directory")->required();
  pb->add_option("--cache", pr.cache, "Response cache directory (default <out>/cache)");
  pb->add_option("--model", pr.model, "Model identifier sent to the endpoint and used as cache key");
  pb->add_option("--api-key-env", pr.api_key_env, "Environment variable holding a bearer token");
  pb->add_flag("--replay", pr.replay, "Serve only from the cache; --predictor names the cached model");
  pb->add_option("--concurrency", pr.concurrency, "Parallel requests")->check(CLI::PositiveNumber);
  pb->add_option("--rate-ms", pr.rate_ms, "Minimum milliseconds between requests");
  pb->add_option("--retries", pr.retries, "Retries per request");
  pb->add_option("--timeout", pr.timeout_s, "Request timeout in seconds");

  RegressArgs rg;
  auto* r = app.add_subcommand("regress", "MSE of GD baselines (or a predictor) on regression tasks");
  r->add_option("--kind", rg.kind, "linear or sine");
  r->add_option("--d", rg.d, "Input dimension");
  r->add_option("--n", rg.n, "Context lengths")->expected(1, -1);
  r->add_option("--alpha", rg.alpha, "Input range bound");
  r->add_option("--count", rg.count, "Tasks per context length");
  r->add_option("--seed", rg.seed, "Seed");
  r->add_option("--variant", rg.variant, "gd1 or gdpp");
  r->add_option("--lr", rg.lr, "Step size");
  r->add_option("--ridge", rg.ridge, "GD++ ridge");
  r->add_option("--predictor", rg.predictor, "Score this predictor instead of a GD baseline");
  r->add_option("--cache", rg.cache, "Response cache directory for --predictor");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*s) return run_sweep_cmd(sw);
    if (*p) return run_phase(ph);
    if (*pt) return run_plot(pl);
    if (*pb) return run_probe(pr);
    if (*r) return run_regress(rg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
