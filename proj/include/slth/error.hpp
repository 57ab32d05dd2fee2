#pragma once

#include <stdexcept>
#include <string>

namespace slth {

/// Base for every error raised by the library. The CLI maps subclasses to
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or mask dimensions do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar parameter was violated.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would visit more subsets than allowed.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Meet-in-the-middle tables cannot be indexed for this instance size.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace slth
