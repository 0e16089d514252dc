#include "iclab/prompt.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

#include "iclab/errors.hpp"
#include "iclab/task_config.hpp"

namespace iclab {

std::string serialize_scalar(double v) {
  if (!std::isfinite(v)) throw NumericalError("serialize: non-finite feature value");
  char buf[400];
  const auto res = std::to_chars(buf, buf + sizeof(buf), std::abs(v), std::chars_format::fixed);
  if (res.ec != std::errc{}) throw NumericalError("serialize: value too large to render");
  std::string_view digits(buf, static_cast<std::size_t>(res.ptr - buf));
  const auto dot = digits.find('.');
  std::string out = std::signbit(v) ? "-" : "";
  if (dot == std::string_view::npos) {
    out.append(digits);
    out += ".0000";
    return out;
  }
  out.append(digits.substr(0, dot + 1));
  std::string frac(digits.substr(dot + 1, 4));
  frac.resize(4, '0');
  out += frac;
  return out;
}

std::string serialize_vector(const Eigen::VectorXd& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ", ";
    out += serialize_scalar(x[i]);
  }
  return out;
}

std::string task_fingerprint(const Task& task) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const double* data, Eigen::Index count) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(data), sizeof(double) * static_cast<std::size_t>(count)), h);
  };
  mix(task.mu.data(), task.mu.size());
  mix(task.context_x.data(), task.context_x.size());
  mix(task.context_y_clean.data(), task.context_y_clean.size());
  mix(task.context_y_noisy.data(), task.context_y_noisy.size());
  mix(task.query_x.data(), task.query_x.size());
  const double q[2] = {static_cast<double>(task.query_y_clean), static_cast<double>(task.query_y_noisy)};
  mix(q, 2);
  return hex64(h);
}

namespace {

constexpr std::string_view kInstruction =
    "You are a binary classification model. Each example below is a feature vector x "
    "followed by its class label y, which is 0 or 1. Use the labeled examples to classify "
    "the final unlabeled point. Output only the predicted label (0 or 1).";

}  // namespace

std::string PromptTask::text() const {
  std::string out = instruction;
  out += "\n\n";
  for (const auto& l : context_lines) {
    out += l;
    out += '\n';
  }
  out += query_line;
  return out;
}

PromptTask build_classification_prompt(const Task& task, std::optional<std::size_t> held_out) {
  const std::size_t n = task.context_size();
  if (held_out && *held_out >= n) throw std::out_of_range("held-out index outside the context");
  if (held_out && n < 2) throw DegenerateContextError("leave-one-out prompt needs N >= 2");
  PromptTask p;
  p.instruction = std::string(kInstruction);
  p.provenance = task_fingerprint(task);
  p.held_out_index = held_out;
  for (std::size_t i = 0; i < n; ++i) {
    if (held_out && *held_out == i) continue;
    const auto row = static_cast<Eigen::Index>(i);
    p.context_lines.push_back("x: " + serialize_vector(task.context_x.row(row).transpose()) +
                              " -> y: " + std::to_string(to_prompt_label(static_cast<int>(task.context_y_noisy[row]))));
  }
  if (held_out) {
    const auto row = static_cast<Eigen::Index>(*held_out);
    p.query_line = "x: " + serialize_vector(task.context_x.row(row).transpose()) + " -> y:";
    p.expected_label = to_prompt_label(static_cast<int>(task.context_y_noisy[row]));
  } else {
    p.query_line = "x: " + serialize_vector(task.query_x) + " -> y:";
    p.expected_label = to_prompt_label(task.query_y_clean);
  }
  return p;
}

namespace {

std::string_view leading_token(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto start = s.find_first_not_of(ws);
  if (start == std::string_view::npos) return {};
  s.remove_prefix(start);
  const auto end = s.find_first_of(ws);
  s = s.substr(0, end);
  constexpr std::string_view markup = "*_`\"'.,;:!()[]{}<>";
  while (!s.empty() && markup.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && markup.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<int> parse_label(std::string_view response) {
  const auto tok = leading_token(response);
  if (tok == "0") return 0;
  if (tok == "1") return 1;
  return std::nullopt;
}

std::optional<double> parse_number(std::string_view response) {
  // Trailing '.' is markup but a leading '-' or '.' belongs to the number, so
  // only strip from the right beyond the generic rule.
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto start = response.find_first_not_of(ws);
  if (start == std::string_view::npos) return std::nullopt;
  std::string_view s = response.substr(start);
  s = s.substr(0, s.find_first_of(ws));
  constexpr std::string_view left_markup = "*_`\"'([{<";
  constexpr std::string_view right_markup = "*_`\"'.,;:!)]}>";
  while (!s.empty() && left_markup.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && right_markup.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace iclab
