#pragma once

#include <stdexcept>
#include <string>

namespace poisonlink {

// File/CSV parsing failure; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, long line = -1)
      : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// NaN/Inf encountered where the caller must be told (optimizer steps, losses).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Snapshot blob or results file does not match the consumer (version/architecture).
class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Online training aborted mid-run; harness flags the partial record.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gradient too small to define a normalized ascent direction.
class DegenerateGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace poisonlink
