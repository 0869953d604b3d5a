#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thinshell {

/// Argument outside the documented domain of an operation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sparse or dense factorization broke down at a given pivot.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, std::ptrdiff_t pivot)
      : std::runtime_error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

  std::ptrdiff_t pivot() const noexcept { return pivot_; }

 private:
  std::ptrdiff_t pivot_;
};

/// Mesh lacks a structure a solver depends on (crack, cut paths, regions).
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed mesh or scenario text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A comparison metric is not defined for the given data (e.g. zero reference norm).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace thinshell
