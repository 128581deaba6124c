#pragma once

#include <stdexcept>
#include <string>

namespace ausculta {

/// File-format error carrying the 1-based line it was detected on.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// Template matching failed for a named landmark.
class DetectionError : public std::runtime_error {
 public:
  explicit DetectionError(const std::string& landmark, const std::string& reason)
      : std::runtime_error("landmark '" + landmark + "' not detected: " + reason),
        landmark_(landmark) {}

  const std::string& landmark() const { return landmark_; }

 private:
  std::string landmark_;
};

/// Geometric configuration too degenerate to continue (e.g. collinear landmarks).
class DegeneracyError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ausculta
