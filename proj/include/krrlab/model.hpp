// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

#include "krrlab/defaults.hpp"

namespace krrlab {

/// Problem definition: data density, target function, kernel bandwidth and
/// geometry. The density on the line is
///     p(x) = |x|^chi exp(-x^2) / Gamma((1+chi)/2),
/// sampled truncated to [-x_max, x_max]; the target is
///     f*(x) = sign(x) |x|^{-xi}.
/// For dim >= 2 points live on a cylinder: the first coordinate follows the
/// 1-d law and the remaining dim coordinates are uniform on the unit sphere
/// (so points have dim+1 coordinates in total); the target still depends on
/// the first coordinate only.
struct Model {
    double chi = 0.0;
    double xi = 0.0;
    double sigma = defaults::kSigma;
    int dim = 1;
    double x_max = defaults::kXMax;

    /// Number of coordinates a sample point carries.
    int point_width() const { return dim == 1 ? 1 : dim + 1; }

    /// Throws ConfigError if the parameters are out of range
    /// (chi >= 0, 0 <= xi < (chi+1)/2, sigma > 0, dim >= 1, x_max > 0).
    void validate() const;
};

/// Density p(x) (untruncated formula; the samplers truncate to the support).
double density(const Model& model, double x);

/// Target f*(x) = sign(x) |x|^{-xi}. For xi == 0 the value at x = 0 is 0 by
/// the sign convention; for xi > 0 the target is singular at 0 and
/// evaluating it there is an error.
double target(const Model& model, double x);

/// Exact CDF of the density truncated to [-x_max, x_max], available in
/// closed form for chi in {0, 1, 2}. Used as the distribution oracle for
/// sampler tests. Throws ConfigError for other chi.
double cdf_truncated(const Model& model, double x);

}  // namespace krrlab
