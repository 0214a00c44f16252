// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// The symse command line: mix, train, enhance, eval, interpret, inspect-book
// and synth-corpus.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad arguments, bad config, ContractError
inline constexpr int kExitData = 2;     // DataError, IoError, filesystem failures
inline constexpr int kExitNumeric = 3;  // NumericError

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace symse::cli
