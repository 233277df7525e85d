#pragma once

#include <stdexcept>
#include <string>

namespace sdpinn {

/// Invalid architecture, config field, or mismatched parameter length.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An input outside the admissible set of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sampling or partition construction that cannot be satisfied.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient. `term()` names the offending loss term.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(std::string term)
      : std::runtime_error("non-finite value in " + term), term_(std::move(term)) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace sdpinn
