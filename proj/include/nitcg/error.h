// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_ERROR_H_
#define NITCG_ERROR_H_

#include <stdexcept>
#include <string>

namespace nitcg {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad user input: unreadable files, invalid arguments, malformed manifests.
class InputError : public Error {
 public:
  using Error::Error;
};

// On-disk container with a wrong magic, version or label dimension.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

// A loss or activation turned non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nitcg

#endif  // NITCG_ERROR_H_
