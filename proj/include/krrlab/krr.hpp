// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "krrlab/defaults.hpp"
#include "krrlab/model.hpp"
#include "krrlab/sampling.hpp"

namespace krrlab {

/// Laplace kernel value at a given distance.
inline double kernel_value(double dist, double sigma) {
    return std::exp(-dist / sigma);
}

/// Dense symmetric kernel matrix, column-major n x n (LAPACK layout).
struct GramMatrix {
    int n = 0;
    std::vector<double> a;

    double at(int i, int j) const { return a[static_cast<long>(j) * n + i]; }
};

/// Build the Gram matrix K_ij = exp(-||x_i - x_j|| / sigma) of a sample.
GramMatrix gram(const SampleSet& s, double sigma);

/// Solve (K + ridge I) alpha = y by dense Cholesky factorization (the ridge
/// is lifted to the ridge floor; a negative ridge is rejected). Throws
/// NumericError naming the failing pivot if the factorization breaks down,
/// and checks the residual ||(K+ridge I)alpha - y||_inf <= 1e-8 ||y||_inf.
std::vector<double> fit(const GramMatrix& K, const std::vector<double>& y,
                        double ridge,
                        double ridge_floor = defaults::kRidgeFloor);

/// Symmetric tridiagonal matrix (diag size n, off size n-1).
struct Tridiag {
    std::vector<double> diag, off;
};

/// Precision matrix (inverse Gram) of the 1-d Laplace kernel on strictly
/// increasing points: exactly tridiagonal thanks to the Markov property of
/// the exponential kernel. Entries are formed via expm1 so nearly-coincident
/// points do not lose precision catastrophically.
Tridiag laplace_precision_1d(const std::vector<double>& xs_sorted, double sigma);

/// Apply the kernel integral/matrix operator (sum_j v_j exp(-|x_i - x_j|/sigma))
/// at every x_i in O(n) via prefix sums. Points must be sorted ascending.
std::vector<double> laplace_matvec_1d(const std::vector<double>& xs_sorted,
                                      const std::vector<double>& v,
                                      double sigma);

/// How a predictor was fitted.
enum class FitRoute { kDense, kFast1d };

/// Fitted kernel ridge regression predictor.
struct Fit {
    FitRoute route = FitRoute::kDense;
    int width = 1;
    double sigma = defaults::kSigma;
    double ridge = 0.0;  ///< effective ridge actually used (after flooring)
    /// Training points in the predictor's internal order (sorted ascending
    /// by the single coordinate for the 1-d fast route).
    std::vector<double> points;
    std::vector<double> alpha;
};

struct FitOptions {
    bool force_dense = false;          ///< disable the 1-d fast route
    double ridge_floor = defaults::kRidgeFloor;
    /// Fast route falls back to dense when any neighbor gap is below
    /// duplicate_gap_rel * sigma (precision-matrix entries degenerate).
    double duplicate_gap_rel = 1e-12;
    /// Fast route falls back when the point range exceeds this many sigma
    /// (prefix-sum exponentials would overflow).
    double overflow_guard = 600.0;
};

/// Fit a predictor to a sample: dense symmetric factorization by default,
/// with an exact O(P) tridiagonal route for 1-d samples (identical results;
/// see laplace_precision_1d). The kernel bandwidth comes from the model.
/// ridge < 0 is rejected; ridge is floored.
Fit fit_krr(const Model& model, const SampleSet& s, double ridge,
            const FitOptions& opts = {});

/// Evaluate the predictor at one point (width coordinates).
double predict(const Fit& f, const double* point);
inline double predict1(const Fit& f, double x) { return predict(f, &x); }

/// Evaluate at many sorted 1-d query points in O(N + P) via prefix sums.
std::vector<double> predict_sorted_1d(const Fit& f,
                                      const std::vector<double>& xs_sorted);

/// Derivative of a 1-d predictor at sorted query points (one-sided at data
/// points), O(N + P).
std::vector<double> predict_derivative_sorted_1d(
    const Fit& f, const std::vector<double>& xs_sorted);

/// Evaluate at the points of a test sample (any width; blocked dense sweep).
std::vector<double> predict_many(const Fit& f, const SampleSet& test);

/// Closed-form coefficients of the large-bandwidth interpolating predictor
/// on one segment between adjacent training points, normalized by
/// |f*(x_left)|: y(t) = a e^{t/sigma} + b e^{-t/sigma} with t = x - x_left,
/// y(0) = sign(x_left), y(x_right - x_left) = sign(x_right) r where
/// r = |x_right / x_left|^{-xi}. Rejects degenerate (x_right <= x_left) and
/// zero-endpoint segments.
struct SegmentCoeffs {
    double a = 0.0, b = 0.0;
};
SegmentCoeffs analytic_segment(double x_left, double x_right, double xi,
                               double sigma);

/// Mean squared predictor disagreement over the points where the two
/// predictors disagree in sign; exactly 0 when they never do.
double sigma_f(const Fit& a, const Fit& b, const SampleSet& test);
double sigma_f(const std::function<double(const double*)>& a,
               const std::function<double(const double*)>& b,
               const SampleSet& test);

}  // namespace krrlab
