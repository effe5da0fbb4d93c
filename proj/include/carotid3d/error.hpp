#pragma once

#include <stdexcept>
#include <string>

namespace carotid {

/// Base of every exception thrown by carotid3d.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a precondition: bad argument, mismatched lengths,
/// malformed input data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The inputs were well formed but the computation has no answer
/// (degenerate PCA, no vessel in any slice, undefined correlation).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace carotid
