// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sspt {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the domain of an operation (odd lmax, radius < step, ...).
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
public:
  using Error::Error;
};

/// The filesystem refused a read or write.
class IoError : public Error {
public:
  using Error::Error;
};

/// Invalid user configuration, detected before any compute.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Inputs that disagree with each other (e.g. a cluster member with no record).
class ConsistencyError : public Error {
public:
  using Error::Error;
};

/// Range refinement impossible (no accepted mass).
class RefinementError : public Error {
public:
  using Error::Error;
};

} // namespace sspt
