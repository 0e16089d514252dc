#pragma once

#include <stdexcept>
#include <string>

namespace iclab {

// Invalid TaskConfig / SweepSpec / probability parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Vector or matrix dimensions do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Leave-one-out requested on a context with a single example.
class DegenerateContextError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss/gradient, singular system, non-finite serialization input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Aggregating or diagramming runs that do not belong together.
class AggregationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// External predictor unreachable after all retries.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iclab
