// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "homesynth/cli.hpp"

int main(int argc, char** argv) {
    return homesynth::cli::run(argc, argv, std::cout, std::cerr);
}
