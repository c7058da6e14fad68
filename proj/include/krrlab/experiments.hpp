// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
//
// Experiment orchestration: learning curves, ridge sweeps, predictor-
// variance studies, exponent fits, collapse scoring, and external-dataset
// sweeps, persisted as CSV with embedded metadata.
//
// Reproducibility contract. Every task in a run is a pure function of
// (global seed, sample-size index, ridge index, replicate coordinate): its
// RNG streams are derived from those four numbers alone, so a run's rows
// are identical whether tasks execute serially or on a worker pool, and a
// re-run of the same config reproduces the CSV byte for byte apart from the
// wall_ms timing column. Each replicate coordinate s fans out into
// sub-streams 4s (training draw), 4s+1 (held-out Monte Carlo test draw) and
// 4s+2 (test sample shared by a predictor pair), which is why replicate
// coordinates must stay below 2^62.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "krrlab/defaults.hpp"
#include "krrlab/model.hpp"
#include "krrlab/sampling.hpp"
#include "krrlab/spectral.hpp"

namespace krrlab {

// ---------------------------------------------------------------------------
// Configuration and result rows
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    Model model;
    std::vector<int> p_values;           ///< training-set sizes, each <= p_cap
    /// Rescaled ridges lambda/P; the entry 0 means "ridgeless" (the fit is
    /// regularized at the numerical floor, theory predictors evaluate at 0).
    std::vector<double> lambda_over_p;
    /// Replicate coordinates (distinct, < 2^62). Together with the global
    /// seed and the grid indices they determine every RNG stream of the run.
    std::vector<std::uint64_t> seeds;

    bool want_test_error = true;  ///< measured generalization error
    bool want_replica = false;    ///< self-consistent spectral prediction
    bool want_kare = false;       ///< training-data-only estimate
    bool want_sigma_f = false;    ///< predictor-pair discrepancy

    /// Multiplies the deterministic test-grid density (one dimension) and
    /// the Monte Carlo test-sample count (higher dimensions).
    double resolution_scale = 1.0;
    int p_cap = defaults::kPCap;
    int workers = 1;              ///< task threads; 0 = hardware concurrency
    std::uint64_t seed = defaults::kSeed;  ///< global stream seed
    std::string output_path;      ///< optional; consumed by the CLI layer
};

/// One grid cell of one experiment. Estimators that were not requested (or
/// that do not apply to a row) are absent and serialize as empty CSV fields.
struct ExperimentRow {
    int p = 0;
    double lambda_over_p = 0.0;  ///< requested rescaled ridge (0 = ridgeless)
    double lambda = 0.0;         ///< absolute ridge handed to the estimators
    std::uint64_t seed = 0;      ///< replicate coordinate
    std::optional<double> test_error;
    std::optional<double> replica;
    std::optional<double> kare;
    std::optional<double> sigma_f;  ///< on the first row of a replicate pair
    double wall_ms = 0.0;
};

/// Mean and standard error of the measured test error at one sample size.
struct LearningCurvePoint {
    int p = 0;
    double mean = 0.0;
    double stderr_mean = 0.0;
    int count = 0;
};

/// Ordinary least squares on (log x, log y).
struct PowerLawFit {
    double exponent = 0.0;
    double amplitude = 0.0;        ///< exp(intercept)
    double exponent_stderr = 0.0;  ///< 0 for an exact power law
};

/// One ridge curve at fixed sample size, for collapse scoring.
struct CollapseCurve {
    double p = 0.0;
    std::vector<double> lambda;  ///< positive, any order
    std::vector<double> error;   ///< positive, same length
};

/// The first n natural numbers, the default replicate coordinates.
std::vector<std::uint64_t> default_seeds(int n);

/// Replicate count divided by a CI/desk scale divisor, floored at two so
/// standard errors remain defined.
int scaled_count(int base, int divisor);

/// Log-spaced lambda/P grid of kLambdaGridPoints spanning kLambdaGridDecades
/// decades centered on the predicted crossover ridge of the model at sample
/// size P.
std::vector<double> default_lambda_grid(const Model& model, int p);

/// Throws ConfigError on an invalid config (empty grids, P out of range,
/// duplicate or oversized seeds, bad resolution scale).
void validate(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

/// Ridgeless learning curve: for every (P, replicate), draw a fresh training
/// set, fit at the ridge floor, and measure the test error against the known
/// target (deterministic quadrature grid in one dimension, fresh Monte Carlo
/// sample of kMcTestPoints * resolution_scale points above). The config's
/// lambda and estimator toggles are ignored: rows carry test_error only.
std::vector<ExperimentRow> learning_curve(const ExperimentConfig& config);

/// Mean and standard error of test_error per sample size, ascending in P.
std::vector<LearningCurvePoint> aggregate_learning_curve(
    const std::vector<ExperimentRow>& rows);

/// Full grid over (P, lambda/P, replicate) with every requested estimator:
///  - test_error: fit on a fresh draw, measure against the target;
///  - replica:    spectral prediction from `spectrum` (required when
///                requested; the value is per-(P, lambda), repeated on each
///                replicate row);
///  - kare:       training-data-only estimate from the same draw (evaluated
///                at the ridge floor when the row is ridgeless);
///  - sigma_f:    replicates are taken in pairs; the first row of each pair
///                carries the discrepancy between the two predictors of the
///                pair on a shared fresh test sample. A trailing unpaired
///                replicate gets none.
std::vector<ExperimentRow> ridge_sweep(const ExperimentConfig& config,
                                       const Spectrum* spectrum = nullptr);

/// Predictor-variance study: ridge_sweep with only sigma_f requested;
/// returns only the pair rows.
std::vector<ExperimentRow> sigma_f_study(const ExperimentConfig& config);

/// Least-squares power-law fit through at least three strictly positive
/// points. Throws ConfigError on size mismatch, too few points, or
/// non-positive data.
PowerLawFit fit_power_law(const std::vector<double>& xs,
                          const std::vector<double>& ys);

/// Collapse quality of ridge curves under the rescaling u = lambda /
/// P^rescale_exponent: mean pairwise squared distance between the curves'
/// log-errors, linearly interpolated in log u onto a shared log-spaced grid
/// over the common support. Lower is better; identical curves score zero.
/// Throws ConfigError on fewer than two curves or non-positive data,
/// NumericError when the rescaled supports do not overlap.
double collapse_score(const std::vector<CollapseCurve>& curves,
                      double rescale_exponent);

/// Argmin of collapse_score over an even grid of n_grid + 1 trial exponents
/// in [lo, hi]; exponents whose rescaling leaves no common support are
/// skipped. Throws NumericError when every trial exponent is skipped.
double best_collapse_exponent(const std::vector<CollapseCurve>& curves,
                              double lo, double hi, int n_grid);

// ---------------------------------------------------------------------------
// External datasets
// ---------------------------------------------------------------------------

/// Read "label, feature..." rows: one sample per line, the label strictly
/// +-1, every row the same width. Blank lines and '#' comments are skipped;
/// at most kDatasetRowCap data rows are kept (the rest are ignored — desk
/// scale is the contract). Throws ConfigError on unreadable files, empty
/// files, ragged rows, unparsable numbers, or labels outside {-1, +1}, each
/// diagnosed with its line number.
SampleSet load_dataset_csv(const std::string& path);

/// Seeded shuffle-and-split. test_fraction in (0, 1); both parts nonempty
/// (requires at least two samples).
struct DatasetSplit {
    SampleSet train, test;
};
DatasetSplit split_dataset(const SampleSet& data, double test_fraction,
                           Rng& rng);

/// Ridge sweep on an external dataset. Per task, the dataset is shuffled by
/// the task's stream and split kHoldoutFraction for test; the fit uses the
/// first P samples of the training part (every configured P must fit, and
/// 2P must fit when sigma_f pairs are requested, else ConfigError).
/// test_error is the mean squared prediction error on the held-out part;
/// kare evaluates on the training subset; sigma_f pairs train on disjoint
/// halves of one shuffle and compare on its held-out part. The replica
/// predictor needs a model spectrum, so requesting it here is a ConfigError.
/// Only model.sigma is read from the config's model.
std::vector<ExperimentRow> dataset_sweep(const ExperimentConfig& config,
                                         const SampleSet& data);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Effective config as a single-line JSON object (alphabetical keys, full
/// round-trip precision) — the metadata line that makes a run
/// reconstructible from its own output.
std::string config_json(const ExperimentConfig& config);

/// CSV with '#'-prefixed metadata lines (config JSON, artifact version,
/// global seed), a header row, then one line per ExperimentRow. Absent
/// estimators are empty fields. Apart from wall_ms the bytes are a pure
/// function of (config, rows).
void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows,
                    const ExperimentConfig& config);
void write_rows_csv(const std::string& path,
                    const std::vector<ExperimentRow>& rows,
                    const ExperimentConfig& config);

/// Spectrum table as CSV: '#' metadata (model JSON, version, fitted
/// coefficient tail), header, then rank,eigenvalue,parity,coefficient,
/// provenance rows. read_spectrum_csv loads it back; eigenvalue provenance
/// round-trips exactly, coefficient provenance is reconstructed from parity
/// (structural zeros) and is not otherwise preserved.
void write_spectrum_csv(std::ostream& out, const Spectrum& sp,
                        const Model& model);
void write_spectrum_csv(const std::string& path, const Spectrum& sp,
                        const Model& model);
Spectrum read_spectrum_csv(const std::string& path);

/// Model as a single-line JSON object.
std::string model_json(const Model& model);

}  // namespace krrlab
