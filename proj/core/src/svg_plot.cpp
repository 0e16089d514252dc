#include "iclab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "iclab/errors.hpp"
#include "io_util.hpp"

namespace iclab {

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::train_accuracy:
      return "train_accuracy";
    case Metric::validation_accuracy:
      return "validation_accuracy";
    case Metric::in_context_accuracy:
      return "in_context_accuracy";
    case Metric::mean_query_loss:
      return "mean_query_loss";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  if (name == "train" || name == "train_accuracy") return Metric::train_accuracy;
  if (name == "validation" || name == "validation_accuracy") return Metric::validation_accuracy;
  if (name == "in_context" || name == "icl" || name == "in_context_accuracy") return Metric::in_context_accuracy;
  if (name == "loss" || name == "mean_query_loss") return Metric::mean_query_loss;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view metric_color(Metric m) noexcept {
  switch (m) {
    case Metric::train_accuracy:
      return "royalblue";
    case Metric::validation_accuracy:
      return "darkorange";
    case Metric::in_context_accuracy:
      return "forestgreen";
    case Metric::mean_query_loss:
      return "purple";
  }
  return "black";
}

std::string_view regime_color(RegimeLabel label) noexcept {
  switch (label) {
    case RegimeLabel::benign_overfitting:
      return "green";
    case RegimeLabel::classical_overfitting:
      return "red";
    case RegimeLabel::underfitting:
      return "gray";
    case RegimeLabel::indeterminate:
      return "url(#hatch)";
  }
  return "white";
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string_view pretty_name(Metric m) {
  switch (m) {
    case Metric::train_accuracy:
      return "train accuracy";
    case Metric::validation_accuracy:
      return "validation accuracy";
    case Metric::in_context_accuracy:
      return "in-context accuracy";
    case Metric::mean_query_loss:
      return "mean query loss";
  }
  return "?";
}

double metric_of(const EvalRecord& r, Metric m) {
  switch (m) {
    case Metric::train_accuracy:
      return r.train_accuracy;
    case Metric::validation_accuracy:
      return r.validation_accuracy;
    case Metric::in_context_accuracy:
      return r.in_context_accuracy;
    case Metric::mean_query_loss:
      return r.mean_query_loss;
  }
  return 0.0;
}

const MetricSeries& series_of(const AggregatedTrajectory& a, Metric m) {
  switch (m) {
    case Metric::train_accuracy:
      return a.train_accuracy;
    case Metric::validation_accuracy:
      return a.validation_accuracy;
    case Metric::in_context_accuracy:
      return a.in_context_accuracy;
    case Metric::mean_query_loss:
      return a.mean_query_loss;
  }
  return a.train_accuracy;
}

// 1-2-5 tick spacing covering [lo, hi] with about `target` intervals.
double nice_step(double span, int target) {
  if (span <= 0.0) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

constexpr double kWidth = 760;
constexpr double kHeight = 460;
constexpr double kLeft = 70;
constexpr double kRight = 200;
constexpr double kTop = 50;
constexpr double kBottom = 60;

struct Line {
  Metric metric;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sd;  // empty when no band
};

std::string open_svg(const std::string& title) {
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" fill=\"white\" class=\"background\"/>\n"
    << "<text x=\"" << num(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\" class=\"title\">"
    << escape(title) << "</text>\n";
  return o.str();
}

std::string render_lines(const PlotSpec& spec, const std::string& title, const std::vector<Line>& lines) {
  double x_lo = lines.front().x.front();
  double x_hi = x_lo;
  double y_lo = 0.0;
  double y_hi = 1.0;
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      x_lo = std::min(x_lo, l.x[i]);
      x_hi = std::max(x_hi, l.x[i]);
      const double band = l.sd.empty() ? 0.0 : l.sd[i];
      y_lo = std::min(y_lo, l.y[i] - band);
      y_hi = std::max(y_hi, l.y[i] + band);
    }
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream o;
  o << open_svg(title);
  o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw)
    << "\" y2=\"" << num(kTop + ph) << "\"/>\n"
    << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
    << "\" y2=\"" << num(kTop + ph) << "\"/>\n</g>\n";

  o << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const double xs = nice_step(x_hi - x_lo, 8);
  for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9; t += xs) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t))
      << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>"
      << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << short_num(t) << "</text>\n";
  }
  const double ys = nice_step(y_hi - y_lo, 5);
  for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-9; t += ys) {
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft + pw)
      << "\" y2=\"" << num(py(t)) << "\" stroke=\"#dddddd\"/>"
      << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
      << short_num(t) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" class=\"x-label\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"13\" transform=\"rotate(-90 18 "
    << num(kTop + ph / 2) << ")\" class=\"y-label\">" << escape(spec.y_label) << "</text>\n";

  for (const auto& l : lines) {
    if (l.sd.empty()) continue;
    o << "<polygon class=\"band\" fill=\"" << metric_color(l.metric) << "\" fill-opacity=\"0.18\" points=\"";
    for (std::size_t i = 0; i < l.x.size(); ++i) o << num(px(l.x[i])) << ',' << num(py(l.y[i] + l.sd[i])) << ' ';
    for (std::size_t i = l.x.size(); i-- > 0;) o << num(px(l.x[i])) << ',' << num(py(l.y[i] - l.sd[i])) << ' ';
    o << "\"/>\n";
  }
  for (const auto& l : lines) {
    o << "<polyline class=\"series\" data-metric=\"" << to_string(l.metric) << "\" fill=\"none\" stroke=\""
      << metric_color(l.metric) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      if (i) o << ' ';
      o << num(px(l.x[i])) << ',' << num(py(l.y[i]));
    }
    o << "\"/>\n";
  }

  o << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = kTop + 10;
  for (const auto& l : lines) {
    const double lx = kLeft + pw + 20;
    o << "<line class=\"legend-swatch\" x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 24)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << metric_color(l.metric) << "\" stroke-width=\"3\"/>"
      << "<text class=\"legend-entry\" x=\"" << num(lx + 30) << "\" y=\"" << num(ly + 4) << "\">"
      << pretty_name(l.metric) << " (" << metric_color(l.metric) << ")</text>\n";
    ly += 22;
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void check_series(const PlotSpec& spec) {
  if (spec.kind != PlotKind::trajectory) throw ConfigError("expected a trajectory plot spec");
  if (spec.series.empty()) throw EmptyDataError("plot: no metrics selected");
}

}  // namespace

std::string format_title(const std::string& tmpl, const TaskConfig& c) {
  std::string out = tmpl;
  auto replace = [&out](std::string_view key, const std::string& value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace("{d}", std::to_string(c.d));
  replace("{n}", std::to_string(c.n));
  replace("{b}", std::to_string(c.b));
  replace("{r}", short_num(c.signal_magnitude()));
  replace("{signal}", c.signal.kind == SignalKind::dim_scaled ? "snr"
                      : c.signal.kind == SignalKind::constant ? "const"
                                                               : "explicit");
  replace("{epsilon}", short_num(c.noise.epsilon));
  replace("{scope}", std::string(to_string(c.noise.scope)));
  replace("{seed}", std::to_string(c.base_seed));
  return out;
}

std::string emit_trajectory_plot(const PlotSpec& spec, const Trajectory& trajectory) {
  check_series(spec);
  if (trajectory.records.empty()) throw EmptyDataError("plot: trajectory has no records");
  std::vector<Line> lines;
  for (Metric m : spec.series) {
    Line l{m, {}, {}, {}};
    for (const auto& r : trajectory.records) {
      l.x.push_back(static_cast<double>(r.step));
      l.y.push_back(metric_of(r, m));
    }
    lines.push_back(std::move(l));
  }
  return render_lines(spec, format_title(spec.title, trajectory.config), lines);
}

std::string emit_trajectory_plot(const PlotSpec& spec, const AggregatedTrajectory& aggregate) {
  check_series(spec);
  if (aggregate.steps.empty()) throw EmptyDataError("plot: aggregate has no steps");
  std::vector<Line> lines;
  for (Metric m : spec.series) {
    const MetricSeries& s = series_of(aggregate, m);
    Line l{m, {}, s.mean, s.sd};
    for (auto step : aggregate.steps) l.x.push_back(static_cast<double>(step));
    lines.push_back(std::move(l));
  }
  return render_lines(spec, format_title(spec.title, aggregate.config), lines);
}

std::string emit_phase_plot(const PlotSpec& spec, const PhaseDiagram& pd) {
  if (pd.x_values.empty() || pd.y_values.empty()) throw EmptyDataError("phase plot: empty grid");
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const double cw = pw / static_cast<double>(pd.x_values.size());
  const double ch = ph / static_cast<double>(pd.y_values.size());

  std::ostringstream o;
  o << open_svg(spec.title);
  o << "<defs><pattern id=\"hatch\" width=\"8\" height=\"8\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><rect width=\"8\" height=\"8\" fill=\"white\"/>"
       "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"8\" stroke=\"black\" stroke-width=\"2\"/></pattern></defs>\n";
  o << "<g class=\"cells\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t yi = 0; yi < pd.y_values.size(); ++yi) {
    // First y value at the bottom.
    const double y0 = kTop + ph - static_cast<double>(yi + 1) * ch;
    for (std::size_t xi = 0; xi < pd.x_values.size(); ++xi) {
      const PhaseCell& cell = pd.at(xi, yi);
      const double x0 = kLeft + static_cast<double>(xi) * cw;
      const std::string fill = cell.present ? std::string(regime_color(cell.regime)) : "white";
      o << "<rect class=\"cell\" data-regime=\"" << (cell.present ? to_string(cell.regime) : "absent")
        << "\" x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(cw) << "\" height=\""
        << num(ch) << "\" fill=\"" << fill << "\" stroke=\"black\"/>";
      o << "<text x=\"" << num(x0 + cw / 2) << "\" y=\"" << num(y0 + ch / 2 + 4)
        << "\" text-anchor=\"middle\" fill=\"black\">";
      if (cell.present) {
        o << "val " << num(cell.mean_validation_accuracy) << " / icl " << num(cell.mean_in_context_accuracy);
      } else {
        o << "n/a";
      }
      o << "</text>\n";
    }
  }
  o << "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t xi = 0; xi < pd.x_values.size(); ++xi) {
    o << "<text x=\"" << num(kLeft + (static_cast<double>(xi) + 0.5) * cw) << "\" y=\"" << num(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << escape(format_value(pd.x_values[xi])) << "</text>\n";
  }
  for (std::size_t yi = 0; yi < pd.y_values.size(); ++yi) {
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(kTop + ph - (static_cast<double>(yi) + 0.5) * ch + 4)
      << "\" text-anchor=\"end\">" << escape(format_value(pd.y_values[yi])) << "</text>\n";
  }
  o << "</g>\n";
  const std::string x_label = spec.x_label.empty() ? std::string(to_string(pd.axis_x)) : spec.x_label;
  const std::string y_label = spec.y_label.empty() ? std::string(to_string(pd.axis_y)) : spec.y_label;
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" class=\"x-label\">"
    << escape(x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"13\" transform=\"rotate(-90 18 "
    << num(kTop + ph / 2) << ")\" class=\"y-label\">" << escape(y_label) << "</text>\n";

  o << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = kTop + 10;
  for (RegimeLabel r : {RegimeLabel::benign_overfitting, RegimeLabel::classical_overfitting,
                        RegimeLabel::underfitting, RegimeLabel::indeterminate}) {
    const double lx = kLeft + pw + 20;
    o << "<rect class=\"legend-swatch\" x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"16\" height=\"16\" fill=\""
      << regime_color(r) << "\" stroke=\"black\"/>"
      << "<text class=\"legend-entry\" x=\"" << num(lx + 24) << "\" y=\"" << num(ly + 4) << "\">" << to_string(r)
      << "</text>\n";
    ly += 24;
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void write_plot(const PlotSpec& spec, const std::string& svg) {
  if (spec.output.empty()) throw IoError("plot: no output path given");
  detail::write_file_atomic(spec.output, svg);
}

}  // namespace iclab
