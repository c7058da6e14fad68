// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT

#include "krrlab/sampling.hpp"

#include <cmath>
#include <cstdio>

#include "krrlab/errors.hpp"

namespace krrlab {

double density_envelope(const Model& model) {
    // Scan a fine grid over [0, x_max] (the density is even), then refine
    // around the best cell by golden-section search. The density is unimodal
    // in |x|, so this is exact up to the refinement tolerance.
    constexpr int kScan = 1024;
    double best_x = 0.0, best_p = density(model, 0.0);
    for (int i = 1; i <= kScan; ++i) {
        const double x = model.x_max * i / kScan;
        const double p = density(model, x);
        if (p > best_p) {
            best_p = p;
            best_x = x;
        }
    }
    const double h = model.x_max / kScan;
    double a = std::max(0.0, best_x - h), b = std::min(model.x_max, best_x + h);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = density(model, c), fd = density(model, d);
    for (int it = 0; it < 80 && (b - a) > 1e-14; ++it) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = density(model, d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = density(model, c);
        }
    }
    const double refined = std::max({best_p, fc, fd});
    return refined * (1.0 + 1e-12);  // tiny headroom against roundoff
}

SampleSet sample_1d(const Model& model, int count, Rng& rng) {
    model.validate();
    if (count < 1) {
        throw ConfigError("sample_1d: sample size must be >= 1");
    }
    const double envelope = density_envelope(model);
    SampleSet s;
    s.width = 1;
    s.x.reserve(count);
    s.y.reserve(count);
    while (s.size() < count) {
        const double x = rng.uniform(-model.x_max, model.x_max);
        const double u = rng.uniform();
        if (u * envelope > density(model, x)) continue;
        if (model.xi > 0.0 && std::abs(x) < 1e-300) continue;  // redraw
        s.x.push_back(x);
        s.y.push_back(target(model, x));
    }
    return s;
}

SampleSet sample_cylinder(const Model& model, int count, Rng& rng) {
    model.validate();
    if (model.dim < 2) {
        throw ConfigError("sample_cylinder: model.dim must be >= 2");
    }
    if (count < 1) {
        throw ConfigError("sample_cylinder: sample size must be >= 1");
    }
    const double envelope = density_envelope(model);
    const int width = model.dim + 1;
    SampleSet s;
    s.width = width;
    s.x.resize(static_cast<long>(count) * width);
    s.y.resize(count);
    for (int i = 0; i < count; ++i) {
        double x0;
        for (;;) {
            x0 = rng.uniform(-model.x_max, model.x_max);
            const double u = rng.uniform();
            if (u * envelope > density(model, x0)) continue;
            if (model.xi > 0.0 && std::abs(x0) < 1e-300) continue;
            break;
        }
        double* row = s.x.data() + static_cast<long>(i) * width;
        row[0] = x0;
        double norm2;
        do {
            norm2 = 0.0;
            for (int k = 1; k < width; ++k) {
                row[k] = rng.normal();
                norm2 += row[k] * row[k];
            }
        } while (norm2 == 0.0);  // redraw the (measure-zero) degenerate case
        const double inv = 1.0 / std::sqrt(norm2);
        for (int k = 1; k < width; ++k) row[k] *= inv;
        s.y[i] = target(model, x0);
    }
    return s;
}

SampleSet sample(const Model& model, int count, Rng& rng) {
    return model.dim == 1 ? sample_1d(model, count, rng)
                          : sample_cylinder(model, count, rng);
}

}  // namespace krrlab
