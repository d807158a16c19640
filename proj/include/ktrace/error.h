#pragma once

#include <stdexcept>
#include <string>

namespace ktrace {

// Base for every error the library raises. The CLI maps the subclasses onto
// exit codes (usage 2, data 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or preconditions supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or other optimisation breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ktrace
