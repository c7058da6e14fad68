// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

namespace krrlab::defaults {

// ---------------------------------------------------------------------------
// Centralized defaults. Every tunable the library or the CLI exposes gets its
// default from this table so there is exactly one place to audit.
// ---------------------------------------------------------------------------

/// Version string stamped into output artifacts.
inline constexpr const char* kVersion = "krrlab 0.1.0";

/// Kernel bandwidth sigma of the Laplace kernel exp(-|x-y|/sigma). The
/// laboratory regime of interest is sigma much larger than the data support.
inline constexpr double kSigma = 100.0;

/// Half-width of the data support: samples are drawn on [-x_max, x_max].
inline constexpr double kXMax = 3.0;

/// Effective ridge floor. A requested ridge of zero ("ridgeless") is lifted
/// to this value to keep the factorization well-posed at double precision.
inline constexpr double kRidgeFloor = 1e-12;

/// Quadrature grid size for the standalone Gram-matrix eigenvalue route.
inline constexpr int kGramGrid = 4000;

/// Fraction of the Gram spectrum that is trusted: the top grid/kTrustDivisor
/// eigenvalues (discretization distorts the rest).
inline constexpr int kGramTrustDivisor = 10;

/// Gram grid used by the hybrid spectrum assembly (larger, so that the
/// trusted window covers all ranks below kHybridGramRanks).
inline constexpr int kAssemblyGramGrid = 10000;

/// Hybrid spectrum: ranks up to here come from the Gram route ...
inline constexpr int kHybridGramRanks = 1000;

/// ... ranks up to here use the self-consistent scheme with exact
/// coefficient projections ...
inline constexpr int kHybridExactRanks = 10000;

/// ... and the spectrum is extended to this length by power-law
/// extrapolation of eigenvalues and coefficients.
inline constexpr int kHybridTargetRanks = 51000;

/// Self-consistent eigenvalue scheme: damping factor, relative tolerance
/// and iteration cap of the fixed-point iteration.
inline constexpr double kSchemeDamping = 0.5;
inline constexpr double kSchemeRelTol = 1e-12;
inline constexpr int kSchemeMaxIter = 1000;

/// Eigenfunction ODE integrator tolerances (Dormand-Prince 5(4)).
inline constexpr double kOdeRelTol = 1e-9;
inline constexpr double kOdeAbsTol = 1e-12;

/// Blow-up truncation threshold for eigenfunction integration: integration
/// stops once |phi| exceeds this multiple of the bulk envelope.
inline constexpr double kOdeBlowupFactor = 1e3;

/// Looser ODE tolerance used for the bulk coefficient-projection sweep
/// (phase error stays ~1e-4 rad, ample for projections, at a fraction of
/// the cost of the verification tolerance above).
inline constexpr double kOdeProjectionTol = 1e-6;

/// Eigenvalue polish (shooting): relative convergence target, cap on ODE
/// solves per rank, and the far-boundary placement factor (integration ends
/// where the density has fallen to this fraction of its turning-point value).
inline constexpr double kPolishRelTol = 1e-9;
inline constexpr int kPolishMaxSolves = 60;
inline constexpr double kFarBoundaryDrop = 1e-8;

/// Small Gram grid used only to seed low-rank eigenvalue polishing, and
/// the highest rank seeded from it.  The crossover balances the two seed
/// error curves against the 1/rank trust window that guarantees level
/// identity: the Gram value is near-exact at low ranks but its error grows
/// past 1% by mid-ranks, while the quantization scheme behaves like
/// 0.3/rank at worst and keeps a uniform 3x margin inside the window, but
/// degrades sharply at the lowest ranks (tens of percent at rank 1 for
/// chi = 2).  Seeds switch from Gram to scheme at this rank.
inline constexpr int kSeedGramGrid = 2000;
inline constexpr int kSeedGramMaxRank = 32;

/// Half-line point count of the eigenpair verification grid.
inline constexpr int kVerifyGridHalf = 20000;

/// WKB bulk validity window: [zeta * lambda^{1/(2+chi)},
/// x2 - delta / sqrt(-ln lambda)] (empirically calibrated, frozen).  The
/// outer buffer must cover the region where the density has decayed to
/// O(lambda sigma) — there the density-gradient term dwarfs the local
/// wavenumber and the bulk form degrades well inside the turning point —
/// which puts delta at ln(40 sigma^2)/2 (about 6.5 for the sigma = 100
/// reference models) plus safety margin.
inline constexpr double kWkbWindowZeta = 10.0;
inline constexpr double kWkbWindowDelta = 9.0;

/// Replica fixed point: relative tolerance on the self-consistency residual,
/// iteration cap, and damping (t <- (1-damping) t + damping S(t)).
inline constexpr double kReplicaRelTol = 1e-10;
inline constexpr int kReplicaMaxIter = 10000;
inline constexpr double kReplicaDamping = 0.5;

/// Monte Carlo test-set size for d >= 2 test-error estimates.
inline constexpr int kMcTestPoints = 100000;

/// Minimum admissible Monte Carlo test-set size.
inline constexpr int kMcTestPointsMin = 1000;

/// Test-set size for the predictor-dispersion statistic sigma_f.
inline constexpr int kSigmaFTestPoints = 10000;

/// Density-adapted test grid: base point budget of the first bin, and the
/// floor parameters of the per-bin budget max(base/m, q_floor).
inline constexpr double kTestGridBase = 1e5;
inline constexpr double kTestGridFloor = 2000;

/// Infinite-sample-limit boundary value problem: mesh size, grading
/// exponent (nodes at x_max*(i/N)^grading), and the regularization floor
/// applied to the singular source when xi > 0.
inline constexpr int kBvpMesh = 6000;
inline constexpr double kBvpGrading = 2.0;
inline constexpr double kBvpSourceEps = 1e-6;

/// Resolution guard for the boundary value problem: at least this many mesh
/// cells must sit below the estimated rise scale of the predictor.
inline constexpr int kBvpMinCellsPerScale = 4;

/// A rise scale qualifies as a plateau only when it is below this fraction
/// of the support half-width (otherwise the predictor never flattens; a
/// source-free rising profile crosses the 1 - 1/e level at about 0.21 of
/// the half-width, safely above this cut).
inline constexpr double kPlateauSeparation = 0.15;

/// Learning-curve experiment: default seed count per sample size.
inline constexpr int kLearningCurveSeeds = 20;

/// Ridge-sweep experiment: default seed counts (small P gets more seeds).
inline constexpr int kSweepSeedsSmall = 200;
inline constexpr int kSweepSeedsLarge = 50;
inline constexpr int kSweepSeedThresholdP = 1000;

/// Ridge-sweep lambda grid: log-spaced points spanning this many decades
/// centered on the crossover ridge lambda*(P).
inline constexpr int kLambdaGridPoints = 20;
inline constexpr double kLambdaGridDecades = 6.0;

/// Maximum number of rows load_dataset_csv will accept (excess is dropped).
inline constexpr int kDatasetRowCap = 10000;

/// Largest sample size an experiment config accepts; guards against
/// accidentally queueing cluster-scale jobs on a desk machine.
inline constexpr int kPCap = 10000;

/// Fraction of an external dataset held out for test-error measurement.
inline constexpr double kHoldoutFraction = 0.2;

/// Number of log-spaced evaluation points used when scoring the collapse of
/// rescaled ridge curves onto each other.
inline constexpr int kCollapseGridPoints = 64;

/// Default global seed.
inline constexpr unsigned long long kSeed = 42;

/// Environment variable consulted for the default output directory.
inline constexpr const char* kOutDirEnv = "KRRLAB_OUT";

}  // namespace krrlab::defaults
