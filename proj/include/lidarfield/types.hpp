// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace lidarfield {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Malformed bytes or text in an input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run or training configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss, gradient or parameter update.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric was requested on inputs it is undefined for (e.g. empty clouds).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lidarfield
