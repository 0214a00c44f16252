// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace symse {

// A caller broke a documented precondition (shape, rate, range).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input files or records that cannot be decoded or are inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures (unwritable directory, unreadable file).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or an internal numeric invariant broke.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SYMSE_REQUIRE(cond, msg)                 \
  do {                                           \
    if (!(cond)) throw ::symse::ContractError(msg); \
  } while (0)

}  // namespace symse
