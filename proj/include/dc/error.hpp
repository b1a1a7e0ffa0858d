#pragma once

#include <stdexcept>
#include <string>

namespace dc {

// Base for errors that the command-line front end maps onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent run configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad input data: wrong magic, truncated files, shapes that cannot be used (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or degenerate numerical state (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dc
