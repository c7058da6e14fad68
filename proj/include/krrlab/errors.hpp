// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace krrlab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameter values, malformed configuration or
/// data files. The command-line driver maps this to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure at runtime: factorization breakdown, divergent
/// fixed-point iteration, unresolved scales, overflow. The command-line
/// driver maps this to exit code 2.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace krrlab
