#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iclab/task_generator.hpp"

namespace iclab {

// Comma-separated entries, each truncated toward zero to four decimals and
// always printed with four decimals: (1.0, -2.5) -> "1.0000, -2.5000".
// Truncation acts on the shortest decimal form that round-trips the double,
// so 0.29 renders as "0.2900". Negative values that truncate to zero keep
// their sign ("-0.0000"), as does -0.0. Throws NumericalError on NaN/inf.
std::string serialize_vector(const Eigen::VectorXd& x);
std::string serialize_scalar(double v);

// Hex digest of a task's numeric content and labels.
std::string task_fingerprint(const Task& task);

// Labels are rendered 0/1: -1 -> 0, +1 -> 1.
constexpr int to_prompt_label(int label) noexcept { return label > 0 ? 1 : 0; }

struct PromptTask {
  std::string instruction;
  std::vector<std::string> context_lines;  // "x: <features> -> y: <0|1>"
  std::string query_line;                  // "x: <features> -> y:"
  int expected_label = 0;                  // 0/1
  std::string provenance;                  // task fingerprint
  std::optional<std::size_t> held_out_index;

  std::string text() const;
};

// Few-shot prompt over the task's context (noisy labels, which equal the clean
// ones when no noise is configured). With `held_out` set, that context example
// becomes the query and its label is the expected answer; the other N-1 stay
// labelled. Otherwise the task's query is asked and its clean label expected.
PromptTask build_classification_prompt(const Task& task,
                                       std::optional<std::size_t> held_out = std::nullopt);

// Strict parse: the first whitespace-delimited token, stripped of surrounding
// punctuation/markup (* _ ` " ' . , ; : ! ( ) [ ] { } < >), must be exactly
// "0" or "1". Anything else is a parse failure (nullopt); nothing is guessed.
std::optional<int> parse_label(std::string_view response);

// Same leading-token rule for a real number (regression probing).
std::optional<double> parse_number(std::string_view response);

}  // namespace iclab
