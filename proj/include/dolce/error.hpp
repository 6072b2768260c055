#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace dolce {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class UnsupportedPolicy : public Error {
 public:
  using Error::Error;
};

class InvalidPropensity : public Error {
 public:
  InvalidPropensity(std::size_t sample, double value)
      : Error("invalid propensity " + std::to_string(value) + " at sample " + std::to_string(sample)),
        sample_(sample) {}
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double grad_norm)
      : Error(what + " (final gradient norm " + format(grad_norm) + ")"), grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
  }
  double grad_norm_;
};

}  // namespace dolce
