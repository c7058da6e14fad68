// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

namespace krrlab::specfun {

/// Airy functions and their derivatives at a common argument.
struct AiryPair {
    double ai;   ///< Ai(x)
    double bi;   ///< Bi(x)
    double aip;  ///< Ai'(x)
    double bip;  ///< Bi'(x)
};

/// Evaluate Ai, Bi, Ai', Bi' at x.
///
/// Maclaurin series (evaluated in compensated double-double arithmetic to
/// defeat the cancellation that limits a plain double evaluation to ~1e-8)
/// for |x| <= 8, asymptotic expansions beyond. At the switch point the two
/// routes agree to better than 1e-11; the worst relative error over
/// [-20, 10] is ~2e-11. Domain |x| <= 100: beyond that Bi overflows, which
/// is reported as a NumericError rather than returning infinity.
AiryPair airy(double x);

/// Complementary error function (thin wrapper over the C library, whose
/// precision is a few ulp and is pinned against frozen references in tests).
double erfc(double x);

/// Natural log of the Gamma function for x > 0 (wrapper over the C library;
/// x <= 0 is rejected because every caller in this project has x > 0 and a
/// negative argument always indicates a bug upstream).
double log_gamma(double x);

}  // namespace krrlab::specfun
