// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_COMMON_H_
#define CDTSE_COMMON_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cdtse {

// Rows are feature channels, columns are frames.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor shapes, channel counts or lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values (out-of-range hyperparameters, labels, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures other than WAV decoding.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdtse

#endif  // CDTSE_COMMON_H_
