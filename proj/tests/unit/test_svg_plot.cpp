#include <doctest.h>

#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "iclab/errors.hpp"
#include "iclab/svg_plot.hpp"
#include "test_support.hpp"

using namespace iclab;
namespace pt = boost::property_tree;

namespace {

pt::ptree parse_svg(const std::string& svg) {
  std::istringstream in(svg);
  pt::ptree tree;
  pt::read_xml(in, tree);  // throws on malformed XML
  return tree;
}

// Counts elements named `tag` whose `class` attribute is `cls`, anywhere in the tree.
std::size_t count_class(const pt::ptree& node, const std::string& tag, const std::string& cls) {
  std::size_t n = 0;
  for (const auto& [name, child] : node) {
    if (name == tag && child.get<std::string>("<xmlattr>.class", "") == cls) ++n;
    n += count_class(child, tag, cls);
  }
  return n;
}

void collect_attr(const pt::ptree& node, const std::string& tag, const std::string& attr, std::vector<std::string>& out) {
  for (const auto& [name, child] : node) {
    if (name == tag) {
      if (auto v = child.get_optional<std::string>("<xmlattr>." + attr)) out.push_back(*v);
    }
    collect_attr(child, tag, attr, out);
  }
}

Trajectory fake_trajectory(std::uint64_t seed) {
  Trajectory t;
  t.config = testing::small_config(50, 20, 1000).with_seed(seed);
  t.config.signal = SignalRegime::constant(6.45);
  t.seed = seed;
  for (int s = 0; s < 5; ++s) {
    const double v = 0.5 + 0.1 * s + 0.01 * static_cast<double>(seed);
    t.records.push_back({s * 10, v, v - 0.05, v + 0.02, 0.7 - 0.1 * s});
  }
  return t;
}

}  // namespace

TEST_CASE("title placeholders") {
  auto c = testing::small_config(50, 20, 1000);
  c.signal = SignalRegime::constant(6.45);
  CHECK(format_title(PlotSpec{}.title, c) == "Model Performance (d=50, N=20, B=1000, R=6.45)");
  c.noise = {0.2, NoiseScope::context_only};
  CHECK(format_title("{signal} eps={epsilon} {scope} seed {seed} {unknown}", c) ==
        "const eps=0.2 context_only seed 11 {unknown}");
}

TEST_CASE("trajectory plot is well-formed with one polyline per metric") {
  PlotSpec spec;
  const auto svg = emit_trajectory_plot(spec, fake_trajectory(0));
  const auto tree = parse_svg(svg);
  CHECK(count_class(tree, "polyline", "series") == 3);
  CHECK(count_class(tree, "line", "legend-swatch") == 3);
  std::vector<std::string> strokes;
  collect_attr(tree, "polyline", "stroke", strokes);
  CHECK(strokes == std::vector<std::string>{"royalblue", "darkorange", "forestgreen"});
  std::vector<std::string> metrics;
  collect_attr(tree, "polyline", "data-metric", metrics);
  CHECK(metrics == std::vector<std::string>{"train_accuracy", "validation_accuracy", "in_context_accuracy"});
  CHECK(svg.find("Model Performance (d=50, N=20, B=1000, R=6.45)") != std::string::npos);
}

TEST_CASE("selected metrics and escaping") {
  PlotSpec spec;
  spec.series = {Metric::mean_query_loss};
  spec.title = "a < b & \"c\"";
  const auto svg = emit_trajectory_plot(spec, fake_trajectory(0));
  const auto tree = parse_svg(svg);
  CHECK(count_class(tree, "polyline", "series") == 1);
  CHECK(svg.find("a &lt; b &amp; &quot;c&quot;") != std::string::npos);
}

TEST_CASE("aggregate plot draws bands") {
  const auto agg = aggregate_seeds({fake_trajectory(0), fake_trajectory(1), fake_trajectory(2)});
  const auto tree = parse_svg(emit_trajectory_plot(PlotSpec{}, agg));
  CHECK(count_class(tree, "polyline", "series") == 3);
  CHECK(count_class(tree, "polygon", "band") == 3);
}

TEST_CASE("phase plot colours cells by regime") {
  PhaseDiagram pd;
  pd.x_values = {0.0, 0.2};
  pd.y_values = {10.0};
  pd.cells = {{PhaseCell{true, 3, RegimeLabel::benign_overfitting, 0.99, 0.99},
               PhaseCell{true, 3, RegimeLabel::indeterminate, 0.7, 0.8}}};
  PlotSpec spec;
  spec.kind = PlotKind::phase;
  spec.title = "phase";
  const auto tree = parse_svg(emit_phase_plot(spec, pd));
  CHECK(count_class(tree, "rect", "cell") == 2);
  std::vector<std::string> regimes;
  collect_attr(tree, "rect", "data-regime", regimes);
  CHECK(regimes == std::vector<std::string>{"benign_overfitting", "indeterminate"});
  CHECK(count_class(tree, "rect", "legend-swatch") == 4);
}

TEST_CASE("empty input is an error, not an empty picture") {
  Trajectory empty;
  CHECK_THROWS_AS(emit_trajectory_plot(PlotSpec{}, empty), EmptyDataError);
  PlotSpec none;
  none.series.clear();
  CHECK_THROWS_AS(emit_trajectory_plot(none, fake_trajectory(0)), EmptyDataError);
  PlotSpec phase;
  phase.kind = PlotKind::phase;
  CHECK_THROWS_AS(emit_phase_plot(phase, PhaseDiagram{}), EmptyDataError);
  CHECK_THROWS_AS(parse_metric("accuracy"), ConfigError);
}

TEST_CASE("write_plot writes atomically to the requested path") {
  testing::TempDir dir;
  PlotSpec spec;
  spec.output = dir.path() / "figs" / "t.svg";
  write_plot(spec, emit_trajectory_plot(spec, fake_trajectory(0)));
  CHECK(std::filesystem::exists(spec.output));
  PlotSpec no_path;
  CHECK_THROWS_AS(write_plot(no_path, "<svg/>"), IoError);
}
