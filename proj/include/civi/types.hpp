#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace civi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Flat concatenation of every trainable parameter of a model.
using ParamVector = Eigen::VectorXd;

// Raised when shapes of inputs disagree with what an operation expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an API is used out of order (e.g. backward before forward).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised on invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace civi
