#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace icdm {

#ifdef ICDM_SCALAR_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

using IndexList = std::vector<int>;

/// Malformed input file (carries file/line context in the message).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally inconsistent data (duplicate logs, shape mismatches, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration value.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller contract violation (invalid relation for a node class, ...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An operation produced a non-finite value; the message names the op.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace icdm
