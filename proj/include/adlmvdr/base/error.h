// adlmvdr/base/error.h

#ifndef ADLMVDR_BASE_ERROR_H_
#define ADLMVDR_BASE_ERROR_H_

#include <stdexcept>
#include <string>

namespace adlmvdr {

// Base of every error thrown by the library. The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace adlmvdr

#endif  // ADLMVDR_BASE_ERROR_H_
