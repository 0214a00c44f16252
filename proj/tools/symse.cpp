// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>

#include "symse/cli.hpp"

int main(int argc, char** argv) {
  return symse::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
