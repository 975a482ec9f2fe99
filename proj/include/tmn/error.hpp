// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tmn {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape mismatch between tensor operands.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Index outside the valid range (rows, segments, nodes).
class IndexError : public Error {
public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Malformed input that could not be parsed at all.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Well-formed input that violates a validation rule.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Inconsistent or unusable configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Training protocol violation (phase ordering, missing prerequisites).
class ProtocolError : public Error {
public:
  using Error::Error;
};

/// Degenerate numeric input: zero-norm embedding, empty consumed segment.
class DegenerateError : public Error {
public:
  using Error::Error;
};

/// A loss over an empty set of anchors or terms.
class EmptyLossError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure (open, read, write).
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace tmn
