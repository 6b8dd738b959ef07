// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fwqa {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Operand shapes do not conform (matmul inner dims, elementwise, ...).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A value-level precondition failed (empty sequence, bad index, bad ratios).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// File could not be read, written, or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A runtime invariant was violated (non-finite loss, corrupt data, ...).
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Scalar>
std::string shape_str(const Mat<Scalar>& m) {
  return shape_str(m.rows(), m.cols());
}

}  // namespace fwqa
