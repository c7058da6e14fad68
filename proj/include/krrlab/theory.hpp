// krrlab: closed-form and semi-analytic test-error predictions for kernel
// ridge regression on singular data densities.
// SPDX-License-Identifier: MIT
//
// Three prediction routes live here, all downstream of the spectral module:
//
//  * the replica (spectral-bias) test-error formula, driven by a
//    self-consistent scalar fixed point over the operator spectrum;
//  * the kernel alignment risk estimator (KARE), computed from a single
//    Cholesky factorization of the sample Gram matrix;
//  * the infinite-sample-limit predictor, the solution of a linear
//    two-point boundary value problem that exposes the characteristic
//    length scale over which the predictor resolves the discontinuity of
//    the target at the origin.
//
// A fourth, purely arithmetic route tabulates every power-law exponent the
// theory predicts for a given (chi, xi, dimension) triple.

#pragma once

#include <string>
#include <vector>

#include "krrlab/defaults.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/model.hpp"
#include "krrlab/spectral.hpp"

namespace krrlab {

// ---------------------------------------------------------------------------
// Replica test-error predictor
// ---------------------------------------------------------------------------

/// Plain (eigenvalue, squared coefficient) table feeding the replica
/// formulas. Both parities belong here: even-rank modes carry zero target
/// weight but still shift the fixed point through their eigenvalues.
struct ModeSpectrum {
    std::vector<double> lambda;  ///< operator eigenvalues, all > 0
    std::vector<double> c2;      ///< squared target coefficients, same size
};

/// Flatten an assembled Spectrum into the replica input table.
ModeSpectrum to_mode_spectrum(const Spectrum& sp);

/// Converged state of the replica self-consistency equation
///     t = sum_rho (1/lambda_rho + P/(ridge + t))^{-1}.
struct ReplicaState {
    double t = 0.0;       ///< fixed point t(P)
    double gamma = 0.0;   ///< gamma(P) = sum_rho (1/lambda_rho + P/(ridge+t))^{-2}
    int P = 0;            ///< training-set size the state was solved for
    double ridge = 0.0;   ///< ridge the state was solved for
    int n_modes = 0;      ///< spectrum length entering the sums
    int iterations = 0;   ///< damped iterations used
    std::string warning;  ///< non-fatal notes (e.g. spectrum shorter than P)
};

/// Solve the replica fixed point by damped iteration from t0 = sum lambda_rho
/// down to a self-consistency residual |S(t) - t| <= rel_tol * t. A spectrum
/// with fewer than P modes is accepted but flagged in the warning field (the
/// truncated sums bias the error estimate low). Throws ConfigError on empty
/// or non-positive spectra, NumericError when the iteration cap is hit.
ReplicaState replica_fixed_point(const ModeSpectrum& s, int P, double ridge,
                                 double rel_tol = defaults::kReplicaRelTol);

/// Replica test-error prediction at a previously solved state:
///     eps_B = (1 - P gamma/(ridge+t)^2)^{-1}
///             * sum_rho c_rho^2 (1 + lambda_rho P/(ridge+t))^{-2}.
/// Throws NumericError when the stability factor 1 - P gamma/(ridge+t)^2
/// is not positive (the replica saddle point is unstable there).
double replica_error(const ModeSpectrum& s, const ReplicaState& st);

/// Convenience: fixed point plus error evaluation in one call.
double replica_error(const ModeSpectrum& s, int P, double ridge);

/// Estimate of the squared-coefficient mass beyond the tabulated spectrum,
/// from the fitted power-law tail c^2 ~ amp * rank^{-index}:
///     integral_{N}^{infinity} amp * rho^{-index} d rho
///       = amp * N^(1-index) / (index - 1),   N = last tabulated rank.
/// The suppression factor (1 + lambda_rho P / w)^{-2} of the omitted modes
/// is below one but close to it (their eigenvalues are tiny), so this is a
/// slightly conservative bound on what the truncated replica sum left out;
/// report it alongside the error prediction. Throws ConfigError on an empty
/// spectrum and NumericError when the fitted tail does not decay fast enough
/// to integrate (index <= 1).
double replica_tail_correction(const Spectrum& sp);

// ---------------------------------------------------------------------------
// Kernel alignment risk estimator
// ---------------------------------------------------------------------------

/// Single-sample kernel alignment risk estimate
///     eps_K = (1/P) y^T (K + ridge I)^{-2} y
///             / ((1/P) Tr[(K + ridge I)^{-1}])^2,
/// computed from one Cholesky factorization (the average over training-set
/// draws belongs to the experiment layer). The estimator concentrates only
/// at finite ridge, so ridge <= 0 is rejected (ConfigError); a Gram matrix
/// that fails to factorize raises NumericError.
double kare(const GramMatrix& K, const std::vector<double>& y, double ridge);

// ---------------------------------------------------------------------------
// Infinite-sample-limit predictor
// ---------------------------------------------------------------------------

/// Tabulated odd predictor on the positive half-support [0, x_max].
struct PredictorTable {
    std::vector<double> x;      ///< mesh nodes, x.front() == 0
    std::vector<double> f;      ///< predictor values at the nodes
    double lambda_over_p = 0.0; ///< rescaled ridge used in the solve
    double residual = 0.0;      ///< componentwise backward error of the solve
};

/// Predictor of kernel ridge regression in the infinite-sample limit at
/// fixed rescaled ridge eta = lambda/P: the minimizer of
///     (eta/sigma) (||f||_2^2 + sigma^2 ||f'||_2^2) + ||f - f*||_p^2,
/// equivalently the linear two-point boundary value problem
///     sigma^2 f'' = (sigma p(x)/eta + 1) f - (sigma/eta) p(x) f*(x)
/// discretized by finite differences on a graded mesh (dense near the
/// origin). Odd symmetry pins f(0) = 0; at x_max the density ends, the
/// exterior solution decays like exp(-(x-x_max)/sigma), and matching it
/// gives the exact radiation condition f'(x_max) = -f(x_max)/sigma. For
/// xi > 0 the singular source is frozen below a small cutoff. Throws
/// ConfigError on bad inputs and NumericError when the mesh cannot resolve
/// the predictor's rise scale (fewer than kBvpMinCellsPerScale cells).
PredictorTable infinite_p_predictor(const Model& model, double lambda_over_p,
                                    int n_cells = defaults::kBvpMesh);

/// Operational characteristic scale of a tabulated predictor: the smallest
/// x at which f reaches (1 - 1/e) of its plateau value. Throws NumericError
/// when no plateau exists (the rise scale is not well separated from the
/// support half-width).
double characteristic_scale(const PredictorTable& table);

// ---------------------------------------------------------------------------
// Exponent table
// ---------------------------------------------------------------------------

/// Every power-law exponent the theory predicts for a data model
/// (chi, xi, dimension). Conventions: "~ P^e" exponents are in the
/// training-set size, "~ (lambda/P)^e" in the rescaled ridge, slopes in the
/// eigenvalue rank.
struct TheoryPrediction {
    double chi = 0.0;
    double xi = 0.0;
    int dim = 1;
    double test_error_exponent = 0.0;        ///< ridgeless eps_t ~ P^e
    double replica_ridgeless_exponent = 0.0; ///< eps_B ~ P^e at vanishing ridge
    double replica_ridge_exponent = 0.0;     ///< eps_B ~ (lambda/P)^e, fixed large P
    double crossover_ridge_exponent = 0.0;   ///< lambda* ~ P^e
    double length_scale_exponent = 0.0;      ///< ell ~ (lambda/P)^e
    double coeff_sq_slope = 0.0;             ///< c_rho^2 ~ rho^e
    double eigenvalue_slope = 0.0;           ///< lambda_rho ~ rho^e
    double r_min_exponent = 0.0;             ///< nearest-sample distance ~ P^e
    double lambda_p_exponent = 0.0;          ///< rank-P eigenvalue ~ P^e
    double q_max_exponent = 0.0;             ///< resolved wavevector ~ P^e
};

/// Tabulate the exponents for a (chi, xi, dim) triple. Requires chi >= 0,
/// xi < (chi+1)/2 (target in L^2(p)) and dim >= 1; the xi-dependent refined
/// formulas exist only in one dimension, so dim >= 2 requires xi = 0
/// (ConfigError otherwise).
TheoryPrediction scaling_laws(double chi, double xi, int dim);

}  // namespace krrlab
