// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Exception types. Each family maps to one CLI exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace homesynth {

// Bad invocation or configuration (exit code 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed, missing or unusable input data (exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss (exit code 3).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Misuse of the differentiation engine: shape mismatches, unbound inputs,
// calling backward before forward.
class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace homesynth
