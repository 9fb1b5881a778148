#pragma once

#include <stdexcept>
#include <string>

namespace gbp {

// Invalid configuration or model parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A policy returned a decision the engine cannot execute.
class PolicyContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The LP solver failed to converge or hit its pivot limit.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gbp
