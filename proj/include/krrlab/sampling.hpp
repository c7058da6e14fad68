// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

#include <vector>

#include "krrlab/model.hpp"
#include "krrlab/rng.hpp"

namespace krrlab {

/// A labelled sample. Points are stored row-major, `width` doubles per
/// point (1 in one dimension, dim+1 on the cylinder).
struct SampleSet {
    int width = 1;
    std::vector<double> x;  ///< size() * width coordinates
    std::vector<double> y;  ///< labels f*(first coordinate)

    int size() const { return static_cast<int>(y.size()); }
    const double* point(int i) const { return x.data() + static_cast<long>(i) * width; }
};

/// Draw P points from the 1-d density truncated to [-x_max, x_max] by
/// rejection from a uniform proposal under a scanned-and-refined max-density
/// envelope, and label them with the target. For xi > 0, draws within
/// 1e-300 of zero are redrawn so labels stay finite.
SampleSet sample_1d(const Model& model, int count, Rng& rng);

/// Draw P cylinder points (dim >= 2): first coordinate follows the 1-d law,
/// the remaining dim coordinates are an independent standard Gaussian vector
/// normalized to the unit sphere. Labels depend on the first coordinate.
SampleSet sample_cylinder(const Model& model, int count, Rng& rng);

/// Dispatch on model.dim.
SampleSet sample(const Model& model, int count, Rng& rng);

/// Scanned-and-refined maximum of the density over [0, x_max] (the envelope
/// constant of the rejection sampler; exposed for tests).
double density_envelope(const Model& model);

}  // namespace krrlab
