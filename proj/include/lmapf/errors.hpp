#pragma once

#include <stdexcept>
#include <string>

namespace lmapf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `source` is a file name or a logical document name,
// `line` is 1-based (0 when the location is a structured field path instead).
class ParseError : public Error {
 public:
  ParseError(std::string source, int line, const std::string& detail)
      : Error(format(source, line, detail)), source_(std::move(source)), line_(line) {}

  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& detail) {
    if (line > 0) return source + ":" + std::to_string(line) + ": " + detail;
    return source + ": " + detail;
  }

  std::string source_;
  int line_;
};

class IllegalForward : public Error {
 public:
  using Error::Error;
};

class NonPositiveWeight : public Error {
 public:
  using Error::Error;
};

// A planner produced a joint step that is not executable. Always a planner bug.
class InvalidJointAction : public Error {
 public:
  InvalidJointAction(int step, const std::string& detail)
      : Error("invalid joint action at step " + std::to_string(step) + ": " + detail), step_(step) {}

  int step() const { return step_; }

 private:
  int step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmapf
