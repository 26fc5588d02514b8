#ifndef NECO_ERRORS_HPP
#define NECO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace neco {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so callers should catch by the most specific type they care
// about.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems: malformed CSV, missing cells, bad labels.
class DataError : public Error {
 public:
  using Error::Error;
};

class DuplicateLabel : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class DegenerateSeries : public Error {
 public:
  using Error::Error;
};

class WindowError : public Error {
 public:
  using Error::Error;
};

class InvalidSample : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double achieved_supremum)
      : Error(what), supremum_(achieved_supremum) {}
  double achieved_supremum() const noexcept { return supremum_; }

 private:
  double supremum_;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class InvalidInit : public Error {
 public:
  using Error::Error;
};

}  // namespace neco

#endif  // NECO_ERRORS_HPP
