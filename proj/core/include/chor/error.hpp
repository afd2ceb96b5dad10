#pragma once

#include <stdexcept>
#include <string>

namespace chor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value is NaN/Inf or otherwise outside the numeric domain of an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied an argument outside the documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chor
