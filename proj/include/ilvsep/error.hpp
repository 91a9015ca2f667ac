#pragma once

#include <stdexcept>
#include <string>

namespace ilvsep {

/// Runtime failure inside the separation pipeline (bad input data, degenerate fits).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, scenario schema or usage. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ilvsep
