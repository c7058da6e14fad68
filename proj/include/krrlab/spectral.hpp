// krrlab: spectral decomposition of the Laplace kernel operator on the
// singular data density.
// SPDX-License-Identifier: MIT
//
// The integral operator (T f)(x) = \int exp(-|x-y|/sigma) f(y) p(y) dy is,
// for the exponential kernel, exactly equivalent to a Schrodinger-type
// boundary value problem on the line:
//     phi'' = (1/sigma^2 - 2 p(x) / (lambda sigma)) phi,   phi -> 0 at +-inf,
// because exp(-|x-y|/sigma)/(2 sigma) is the Green's function of
// (1/sigma^2 - d^2/dx^2).  Everything in this module exploits that exact
// correspondence: eigenvalues come from a WKB-quantization fixed point or a
// Nystrom (Gram) discretization, eigenfunctions from direct ODE integration
// with shooting refinement, and target coefficients from quadrature states
// carried along the integration.
//
// Rank convention: rank 1 is the largest eigenvalue with an odd
// eigenfunction; even/odd ranks carry even/odd eigenfunctions respectively
// (the even ground state of the operator is above rank 1 and carries no
// target weight, the target being odd).  The eigenfunction at rank r has
// floor(r/2) zeros on the open positive half-line.

#pragma once

#include <cstdint>
#include <vector>

#include "krrlab/defaults.hpp"
#include "krrlab/model.hpp"

namespace krrlab {

// ---------------------------------------------------------------------------
// WKB machinery
// ---------------------------------------------------------------------------

/// Local wavenumber squared Gamma^2(x) = 2 p(x) / (lambda sigma) - 1/sigma^2.
double gamma_sq(const Model& model, double lambda, double x);

struct TurningPoints {
    double x1 = 0.0;  ///< inner edge of the classically allowed region
    double x2 = 0.0;  ///< outer edge
};

/// Classical turning points Gamma^2 = 0 on the positive half-line.  For
/// chi == 0 the allowed region starts at x1 = 0 exactly.  Throws
/// NumericError when no allowed region exists (lambda too large).
TurningPoints turning_points(const Model& model, double lambda);

/// Phase integral int_{x1}^{x2} sqrt(Gamma^2) dx (sqrt endpoint behavior
/// handled by tanh-sinh quadrature).
double phase_integral(const Model& model, double lambda);

/// Cumulative phase int_{x1}^{x} sqrt(Gamma^2) dx for x1 <= x <= x2.
double phase_integral_to(const Model& model, double lambda, double x);

/// Airy matching argument mu(lambda) of the quantization condition; 0 when
/// chi == 0.
double airy_matching_mu(const Model& model, double lambda);

/// Boundary mixing constant gamma entering the quantization phase:
/// Ai(mu)/Bi(mu) for odd ranks, Ai'(mu)/Bi'(mu) for even ranks.
double scheme_gamma(const Model& model, double lambda, bool odd_rank);

/// Self-consistent WKB eigenvalue at the given rank (rank >= 1).  Damped
/// fixed-point iteration; throws NumericError with the last two iterates
/// on divergence.  The relative error falls off like 0.3/rank or better;
/// at the lowest ranks it reaches percent to tens-of-percent level (worst
/// for strongly vanishing densities: about -45% at rank 1 for chi = 2).
double eigenvalue_scheme(const Model& model, int rank);

/// Warm-started sweep of eigenvalue_scheme over many ranks (each solve is
/// seeded from the previous one); identical to rank-by-rank calls.
std::vector<double> eigenvalues_scheme(const Model& model,
                                       const std::vector<int>& ranks);

// ---------------------------------------------------------------------------
// Nystrom (Gram-matrix) route
// ---------------------------------------------------------------------------

struct GramSpectrum {
    /// All grid eigenvalues, descending (index 0 is the even ground state).
    std::vector<double> values;
    /// Parity labels aligned with values: +1 even, -1 odd.
    std::vector<int> parity;
    /// Number of leading eigenvalues considered converged (grid/divisor).
    int trusted = 0;
    /// Operator trace approximation sum_i w_i p(x_i) (equals sum of values
    /// up to roundoff; kept for the invariant check).
    double trace = 0.0;
};

/// Eigenvalues of the kernel operator discretized on a mirror-symmetric
/// midpoint grid of n_grid points over [-x_max, x_max], split into even and
/// odd parity blocks.  n_grid must be even and positive.
GramSpectrum eigenvalues_gram(const Model& model,
                              int n_grid = defaults::kGramGrid);

/// Nystrom eigenvalues on a caller-supplied mirror-symmetric point set with
/// weights (sorted ascending; each x must pair with -x exactly, one central
/// zero allowed).  Throws ConfigError if the set is not mirror-symmetric.
GramSpectrum nystrom_eigenvalues(const Model& model,
                                 const std::vector<double>& xs,
                                 const std::vector<double>& ws);

/// Eigenvalue at the given rank of the module-wide rank convention (the
/// ground state at index 0 carries no rank).  Throws ConfigError when the
/// rank lies outside the trusted window.
double gram_rank_value(const GramSpectrum& gs, int rank);

// ---------------------------------------------------------------------------
// ODE route: eigenfunctions, shooting polish, coefficient projection
// ---------------------------------------------------------------------------

/// Eigenfunction ODE solution on [0, x_end], integrated with parity initial
/// conditions (odd: phi=0, phi'=1; even: phi=1, phi'=0) and augmented
/// quadrature states.
struct OdeSolution {
    std::vector<double> x;     ///< accepted step abscissae, ascending from 0
    std::vector<double> phi;   ///< eigenfunction values (unnormalized)
    std::vector<double> dphi;  ///< derivative values
    double norm_half = 0.0;    ///< int_0^{x_end} p phi^2 dx
    double proj_half = 0.0;    ///< int_0^{x_end} p f* phi dx
    double peak = 0.0;         ///< max |phi| over the integration
    double mismatch = 0.0;     ///< normalized decay mismatch at x_end
    int zeros = 0;             ///< sign changes of phi on (0, x_end)
    bool truncated = false;    ///< blow-up guard stopped the integration
};

/// Far-boundary abscissa for eigenfunction integration at this lambda: the
/// density has dropped well below the turning-point level there.
double ode_far_boundary(const Model& model, double lambda);

/// Integrate the eigenfunction ODE at a trial lambda.  When grid is
/// non-empty, integration steps land exactly on the grid abscissae
/// (ascending, within [0, x_end]) and phi is recorded there instead of at
/// adaptive step ends.
OdeSolution integrate_eigen_ode(const Model& model, double lambda, bool odd,
                                double x_end,
                                double rel_tol = defaults::kOdeRelTol,
                                const std::vector<double>& grid = {});

/// Polished ODE eigenpair at a rank: refine a seed eigenvalue by a secant
/// iteration on the far-boundary decay mismatch, restricted to a trust
/// window around the seed so the iteration cannot slide to a neighboring
/// level.  An explicit seed > 0 must therefore lie within about 1/rank of
/// the true eigenvalue (same-parity neighbors sit ~4/rank apart); seed <= 0
/// picks one automatically (Gram discretization at low ranks, the
/// self-consistent scheme above).  Throws NumericError when no decay
/// eigenvalue lies inside the trust window.
struct Eigenpair {
    int rank = 0;
    double lambda = 0.0;
    OdeSolution sol;  ///< solution at the converged lambda
};
Eigenpair eigenpair_ode(const Model& model, int rank, double seed = 0.0,
                        double rel_tol = defaults::kOdeRelTol);

/// Target coefficient c_r = <f*, phi_r>_p with phi_r unit-normalized in
/// L^2(p).  Structurally zero at even ranks (even eigenfunction against the
/// odd target).
double project_coefficient(const Model& model, const Eigenpair& pair);

/// Relative residual ||T phi - lambda phi||_p / (lambda ||phi||_p) of a
/// candidate eigenpair sampled on a sorted quadrature grid (weights w are
/// plain quadrature weights; the density factor is applied internally).
/// The operator is applied in O(n) via the kernel's Markov structure.
double eigenpair_residual(const Model& model, double lambda,
                          const std::vector<double>& xs,
                          const std::vector<double>& ws,
                          const std::vector<double>& phi);

/// Mirror-symmetric verification grid (2 * half points, midpoint weights)
/// spanning [-x_end, x_end], and the eigenfunction values on it.
struct VerificationGrid {
    std::vector<double> xs, ws, phi;
};
VerificationGrid eigenpair_on_grid(const Model& model, const Eigenpair& pair,
                                   int half_points = defaults::kVerifyGridHalf);

// ---------------------------------------------------------------------------
// WKB bulk eigenfunction
// ---------------------------------------------------------------------------

struct WkbWindow {
    double lo = 0.0, hi = 0.0;
};

/// Validity window of the bulk WKB form at this lambda (frozen calibration
/// constants; see defaults).
WkbWindow wkb_window(const Model& model, double lambda);

/// Unnormalized bulk WKB eigenfunction (Gamma^2)^{-1/4} [sin Phi - gamma
/// cos Phi] with Phi(x) = int_{x1}^{x} sqrt(Gamma^2) + pi/4, evaluated at
/// ascending abscissae inside the window.
std::vector<double> wkb_bulk(const Model& model, double lambda, bool odd_rank,
                             const std::vector<double>& xs);

// ---------------------------------------------------------------------------
// Assembled spectrum (hybrid eigenvalue/coefficient table)
// ---------------------------------------------------------------------------

enum class RankSource : std::uint8_t {
    kGram,          ///< Nystrom eigenvalue
    kScheme,        ///< self-consistent WKB eigenvalue
    kExact,         ///< ODE-projected coefficient (polished eigenvalue)
    kExtrapolated,  ///< power-law tail extrapolation
    kParity,        ///< structural zero (even rank coefficient)
};

const char* rank_source_name(RankSource s);

struct SpectrumRow {
    int rank = 0;
    double eigenvalue = 0.0;
    int parity = 0;  ///< +1 even eigenfunction, -1 odd
    double coefficient = 0.0;
    RankSource eigenvalue_source = RankSource::kGram;
    RankSource coefficient_source = RankSource::kParity;
};

struct Spectrum {
    std::vector<SpectrumRow> rows;  ///< ranks 1..target, ascending rank
    /// Fitted coefficient tail c^2 ~ amp * rank^{-index} (used for the
    /// closed-form correction beyond the table).
    double tail_amp = 0.0;
    double tail_index = 0.0;
};

struct SpectrumOptions {
    int gram_ranks = defaults::kHybridGramRanks;    ///< Gram eigenvalues to here
    int exact_ranks = defaults::kHybridExactRanks;  ///< exact projections to here
    int target_ranks = defaults::kHybridTargetRanks;
    int gram_grid = defaults::kAssemblyGramGrid;
    double projection_tol = defaults::kOdeProjectionTol;
};

/// Assemble the full eigenvalue/coefficient table of the model: Gram
/// eigenvalues for low ranks, scheme eigenvalues above, exact ODE
/// coefficient projections at odd ranks up to exact_ranks, power-law
/// extrapolation beyond, zeros at even ranks.
Spectrum assemble_spectrum(const Model& model, const SpectrumOptions& opts = {});

/// Power-law tail fit of squared coefficients: fit c^2 = amp * rank^{-index}
/// on the trailing decade of (rank, c) pairs.  Needs at least 10 points with
/// nonzero c.  Returns {amp, index}.
struct TailFit {
    double amp = 0.0, index = 0.0;
};
TailFit fit_coefficient_tail(const std::vector<int>& ranks,
                             const std::vector<double>& coeffs);

}  // namespace krrlab
