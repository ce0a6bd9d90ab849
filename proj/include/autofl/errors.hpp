#pragma once

#include <stdexcept>
#include <string>

namespace autofl {

/// A document did not match its schema. `field()` names the offending key path.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A well-formed document violated a semantic invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The model's context window was exceeded. Never retried.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network or server failure that survived the retry policy.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A replayed request does not match the recorded one.
class ReplayMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PersistenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autofl
