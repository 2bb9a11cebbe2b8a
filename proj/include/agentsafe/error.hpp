#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace agentsafe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Scenario construction rejected (bad agent count, bad topology, ...).
class InvalidScenario : public Error {
public:
  using Error::Error;
};

/// No relationship declared for an ordered agent pair.
class MissingRelationship : public Error {
public:
  using Error::Error;
};

/// Input text failed to parse; carries 1-based line context when known.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

/// Structurally valid input that violates the dataset schema.
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Backend (model or embedding endpoint) failed or replied out of protocol.
class BackendError : public Error {
public:
  explicit BackendError(const std::string& what, bool retryable = false)
      : Error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

private:
  bool retryable_;
};

class ExtractionError : public BackendError {
public:
  using BackendError::BackendError;
};

class DetectionUnavailable : public BackendError {
public:
  using BackendError::BackendError;
};

/// The requested attack cannot be staged on this scenario (reported as N/A).
class AttackInapplicable : public Error {
public:
  using Error::Error;
};

class UndefinedMetric : public Error {
public:
  using Error::Error;
};

/// A run trace is missing data the cost ledger needs.
class IncompleteTrace : public Error {
public:
  using Error::Error;
};

/// Scenario configuration problems, all collected before reporting.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(render(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

private:
  static std::string render(const std::vector<std::string>& ps) {
    std::string out = "invalid configuration:";
    for (const auto& p : ps) {
      out += "\n  - " + p;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace agentsafe
