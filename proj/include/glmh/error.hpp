#pragma once

#include <stdexcept>
#include <string>

namespace glmh {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent inputs (shapes, non-finite values, bad files).
class InputError : public Error {
 public:
  using Error::Error;
};

// Factorization failures and other numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// exp(z'gamma) would leave double range at the named time point.
class OverflowError : public NumericalError {
 public:
  OverflowError(const std::string& what, long time_index)
      : NumericalError(what), time_index_(time_index) {}
  long time_index() const noexcept { return time_index_; }

 private:
  long time_index_;
};

}  // namespace glmh
