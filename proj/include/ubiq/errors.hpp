#pragma once

#include <stdexcept>
#include <string>

namespace ubiq {

/// A caller-supplied argument violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside a function's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A composition or summand leaves the PowerLog/ExpPower family.
class NotClosedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// An enumeration would exceed its configured cap.
class ResourceCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ubiq
