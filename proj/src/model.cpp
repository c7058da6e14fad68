// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT

#include "krrlab/model.hpp"

#include <cmath>
#include <cstdio>

#include "krrlab/errors.hpp"
#include "krrlab/specfun.hpp"

namespace krrlab {

void Model::validate() const {
    char msg[160];
    if (!(chi >= 0.0) || !std::isfinite(chi)) {
        std::snprintf(msg, sizeof msg,
                      "model: chi must be >= 0 (got %.6g)", chi);
        throw ConfigError(msg);
    }
    if (!(xi >= 0.0) || !(xi < 0.5 * (chi + 1.0))) {
        std::snprintf(msg, sizeof msg,
                      "model: xi must satisfy 0 <= xi < (chi+1)/2 "
                      "(got xi=%.6g, chi=%.6g)", xi, chi);
        throw ConfigError(msg);
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        std::snprintf(msg, sizeof msg,
                      "model: sigma must be positive (got %.6g)", sigma);
        throw ConfigError(msg);
    }
    if (dim < 1) {
        std::snprintf(msg, sizeof msg,
                      "model: dim must be >= 1 (got %d)", dim);
        throw ConfigError(msg);
    }
    if (!(x_max > 0.0) || !std::isfinite(x_max)) {
        std::snprintf(msg, sizeof msg,
                      "model: x_max must be positive (got %.6g)", x_max);
        throw ConfigError(msg);
    }
}

double density(const Model& model, double x) {
    const double ax = std::abs(x);
    const double log_norm = specfun::log_gamma(0.5 * (1.0 + model.chi));
    if (model.chi == 0.0) {
        return std::exp(-x * x - log_norm);
    }
    if (ax == 0.0) return 0.0;
    return std::exp(model.chi * std::log(ax) - x * x - log_norm);
}

double target(const Model& model, double x) {
    if (x == 0.0) {
        if (model.xi > 0.0) {
            throw NumericError(
                "target: f* is singular at x = 0 for xi > 0");
        }
        return 0.0;  // sign(0) = 0 convention
    }
    const double mag =
        model.xi == 0.0 ? 1.0 : std::pow(std::abs(x), -model.xi);
    return x > 0.0 ? mag : -mag;
}

namespace {

/// One-sided mass F(x) - 1/2 of the untruncated density, for x >= 0.
double half_mass(double chi, double x) {
    if (chi == 0.0) {
        return 0.5 * (1.0 - specfun::erfc(x));  // erf(x)/2
    }
    if (chi == 1.0) {
        return 0.5 * (-std::expm1(-x * x));  // (1 - e^{-x^2})/2
    }
    if (chi == 2.0) {
        // gammainc(3/2, x^2)/Gamma(3/2) = erf(x) - 2 x e^{-x^2}/sqrt(pi)
        return 0.5 * (1.0 - specfun::erfc(x) -
                      2.0 * x * std::exp(-x * x) / std::sqrt(M_PI));
    }
    throw ConfigError(
        "cdf_truncated: closed form implemented for chi in {0, 1, 2} only");
}

}  // namespace

double cdf_truncated(const Model& model, double x) {
    if (x <= -model.x_max) return 0.0;
    if (x >= model.x_max) return 1.0;
    const double total = 2.0 * half_mass(model.chi, model.x_max);
    const double signed_mass =
        x >= 0.0 ? half_mass(model.chi, x) : -half_mass(model.chi, -x);
    return (half_mass(model.chi, model.x_max) + signed_mass) / total;
}

}  // namespace krrlab
