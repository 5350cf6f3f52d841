#pragma once

#include <stdexcept>
#include <string>

namespace twist {

// Argument outside the mathematical domain of an operation (negative action,
// non-finite angle, action outside the configured interval).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Angle undefined at the origin of the (q, p) plane.
class DegeneratePointError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Caller violated a documented precondition (counts, sizes, ranges).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requested quantity has no closed form and no fallback was allowed.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace twist
