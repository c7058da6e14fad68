// krrlab: closed-form and semi-analytic test-error predictions for kernel
// ridge regression on singular data densities.
// SPDX-License-Identifier: MIT

#include "krrlab/theory.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "krrlab/errors.hpp"

namespace krrlab {

namespace {

// Self-consistency map S(t) = sum_rho lambda_rho w / (w + lambda_rho P)
// with w = ridge + t, written to avoid dividing by small eigenvalues.
double replica_map(const std::vector<double>& lambda, double P, double w) {
    double s = 0.0;
    for (double l : lambda) s += l * w / (w + l * P);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Replica test-error predictor
// ---------------------------------------------------------------------------

ModeSpectrum to_mode_spectrum(const Spectrum& sp) {
    ModeSpectrum m;
    m.lambda.reserve(sp.rows.size());
    m.c2.reserve(sp.rows.size());
    for (const SpectrumRow& row : sp.rows) {
        m.lambda.push_back(row.eigenvalue);
        m.c2.push_back(row.coefficient * row.coefficient);
    }
    return m;
}

ReplicaState replica_fixed_point(const ModeSpectrum& s, int P, double ridge,
                                 double rel_tol) {
    if (s.lambda.empty())
        throw ConfigError("replica_fixed_point: empty spectrum");
    if (P < 0) throw ConfigError("replica_fixed_point: P must be >= 0");
    if (ridge < 0.0)
        throw ConfigError("replica_fixed_point: ridge must be >= 0");
    if (!(rel_tol > 0.0))
        throw ConfigError("replica_fixed_point: rel_tol must be > 0");
    double t0 = 0.0;
    for (double l : s.lambda) {
        if (!(l > 0.0) || !std::isfinite(l))
            throw ConfigError(
                "replica_fixed_point: eigenvalues must be finite and > 0");
        t0 += l;
    }

    ReplicaState st;
    st.P = P;
    st.ridge = ridge;
    st.n_modes = static_cast<int>(s.lambda.size());
    if (static_cast<std::size_t>(P) > s.lambda.size())
        st.warning =
            "spectrum has fewer modes than samples (" +
            std::to_string(s.lambda.size()) + " < " + std::to_string(P) +
            "); truncated sums bias the predicted error low";

    // t0 = sum lambda is an upper bound of the fixed point (the map S
    // satisfies S(t) < sum lambda for every t), so the damped iteration
    // descends monotonically onto it.
    const double pp = static_cast<double>(P);
    double t = t0;
    int it = 0;
    for (; it < defaults::kReplicaMaxIter; ++it) {
        const double mapped = replica_map(s.lambda, pp, ridge + t);
        if (std::abs(mapped - t) <= rel_tol * t + 1e-300) {
            t = mapped;
            break;
        }
        t = (1.0 - defaults::kReplicaDamping) * t +
            defaults::kReplicaDamping * mapped;
    }
    if (it == defaults::kReplicaMaxIter)
        throw NumericError(
            "replica_fixed_point: no convergence in " +
            std::to_string(defaults::kReplicaMaxIter) + " iterations (P=" +
            std::to_string(P) + ", ridge=" + std::to_string(ridge) + ")");
    st.t = t;
    st.iterations = it + 1;

    const double w = ridge + t;
    double gamma = 0.0;
    for (double l : s.lambda) {
        const double term = l * w / (w + l * pp);
        gamma += term * term;
    }
    st.gamma = gamma;
    return st;
}

double replica_error(const ModeSpectrum& s, const ReplicaState& st) {
    if (s.c2.size() != s.lambda.size())
        throw ConfigError(
            "replica_error: coefficient table does not match the spectrum");
    const double pp = static_cast<double>(st.P);
    const double w = st.ridge + st.t;
    const double stability = 1.0 - pp * st.gamma / (w * w);
    if (!(stability > 0.0))
        throw NumericError(
            "replica_error: unstable saddle point (1 - P gamma/(ridge+t)^2 = " +
            std::to_string(stability) + ")");
    double sum = 0.0;
    for (std::size_t i = 0; i < s.lambda.size(); ++i) {
        const double suppress = w / (w + s.lambda[i] * pp);
        sum += s.c2[i] * suppress * suppress;
    }
    return sum / stability;
}

double replica_error(const ModeSpectrum& s, int P, double ridge) {
    return replica_error(s, replica_fixed_point(s, P, ridge));
}

double replica_tail_correction(const Spectrum& sp) {
    if (sp.rows.empty()) {
        throw ConfigError("replica_tail_correction: empty spectrum");
    }
    const double amp = sp.tail_amp;
    const double index = sp.tail_index;
    if (!std::isfinite(amp) || !std::isfinite(index) || amp < 0.0) {
        throw NumericError("replica_tail_correction: invalid tail fit (amp=" +
                           std::to_string(amp) +
                           ", index=" + std::to_string(index) + ")");
    }
    if (index <= 1.0) {
        throw NumericError(
            "replica_tail_correction: tail index " + std::to_string(index) +
            " <= 1, the extrapolated coefficient mass does not converge");
    }
    const double n_last = static_cast<double>(sp.rows.back().rank);
    return amp * std::pow(n_last, 1.0 - index) / (index - 1.0);
}

// ---------------------------------------------------------------------------
// Kernel alignment risk estimator
// ---------------------------------------------------------------------------

double kare(const GramMatrix& K, const std::vector<double>& y, double ridge) {
    const int n = K.n;
    if (n < 1) throw ConfigError("kare: empty Gram matrix");
    if (y.size() != static_cast<std::size_t>(n))
        throw ConfigError("kare: label vector length does not match the Gram "
                          "matrix");
    if (!(ridge > 0.0))
        throw ConfigError(
            "kare: the estimator concentrates only at positive ridge");

    // One Cholesky factorization serves both pieces: alpha = (K+ridge)^{-1} y
    // gives the numerator as alpha.alpha, and the trace of the inverse is the
    // squared Frobenius norm of inv(L).
    std::vector<double> a = K.a;
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] += ridge;
    int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, a.data(), n);
    if (info != 0)
        throw NumericError("kare: Cholesky factorization failed at pivot " +
                           std::to_string(info));
    std::vector<double> alpha = y;
    info = LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, a.data(), n,
                          alpha.data(), n);
    if (info != 0)
        throw NumericError("kare: triangular solve failed");
    double num = 0.0;
    for (double v : alpha) num += v * v;

    info = LAPACKE_dtrtri(LAPACK_COL_MAJOR, 'L', 'N', n, a.data(), n);
    if (info != 0)
        throw NumericError("kare: triangular inversion failed at pivot " +
                           std::to_string(info));
    double trace_inv = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) {
            const double v = a[static_cast<std::size_t>(j) * n + i];
            trace_inv += v * v;
        }

    return static_cast<double>(n) * num / (trace_inv * trace_inv);
}

// ---------------------------------------------------------------------------
// Infinite-sample-limit predictor
// ---------------------------------------------------------------------------

PredictorTable infinite_p_predictor(const Model& model, double lambda_over_p,
                                    int n_cells) {
    model.validate();
    if (model.dim != 1)
        throw ConfigError(
            "infinite_p_predictor: the boundary value problem is 1-d only");
    if (!(lambda_over_p > 0.0) || !std::isfinite(lambda_over_p))
        throw ConfigError(
            "infinite_p_predictor: lambda/P must be finite and > 0");
    if (n_cells < 16)
        throw ConfigError("infinite_p_predictor: mesh too small (< 16 cells)");

    const double sigma = model.sigma;
    const double eta = lambda_over_p;
    const int n = n_cells;            // cells; nodes 0..n
    const double xm = model.x_max;

    // The predictor rises from 0 over a scale ell ~ (eta sigma)^{1/(2+chi)};
    // demand a few mesh cells under that scale before solving.
    const double ell_est = std::pow(eta * sigma, 1.0 / (2.0 + model.chi));
    std::vector<double> x(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        x[i] = xm * std::pow(static_cast<double>(i) / n,
                             defaults::kBvpGrading);
    if (x[defaults::kBvpMinCellsPerScale] > ell_est)
        throw NumericError(
            "infinite_p_predictor: mesh too coarse to resolve the rise scale "
            "(" + std::to_string(ell_est) + "); refine the mesh or raise "
            "lambda/P");

    // Unknowns are the nodes 1..n (the Dirichlet value f(0) = 0 is exact by
    // construction and kept out of the linear system). Row for node i:
    // sigma^2 f'' - (1 + sigma p/eta) f = -(sigma p/eta) g with the second
    // derivative on the non-uniform 3-point stencil; the source g is the
    // target, frozen below the regularization cutoff when it is singular at
    // the origin.
    const double eps0 = std::max(defaults::kBvpSourceEps, x[1]);
    const std::size_t nn = static_cast<std::size_t>(n);
    std::vector<double> dl(nn - 1, 0.0), d(nn, 0.0), du(nn - 1, 0.0), b(nn, 0.0);

    for (int i = 1; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) - 1;
        const double hm = x[i] - x[i - 1];
        const double hp = x[i + 1] - x[i];
        const double s = sigma * density(model, x[i]) / eta;
        const double g = target(model, std::max(x[i], eps0));
        if (i > 1) dl[k - 1] = sigma * sigma * 2.0 / (hm * (hm + hp));
        du[k] = sigma * sigma * 2.0 / (hp * (hm + hp));
        d[k] = -sigma * sigma * 2.0 / (hm * hp) - (1.0 + s);
        b[k] = -s * g;
    }
    // Radiation condition at the support edge: the exterior solution decays
    // like exp(-(x-xm)/sigma), so f' + f/sigma = 0 there.
    {
        const double h = x[n] - x[n - 1];
        dl[nn - 2] = -1.0 / h;
        d[nn - 1] = 1.0 / h + 1.0 / sigma;
        b[nn - 1] = 0.0;
    }

    // dgtsv overwrites its inputs; keep copies for the residual check.
    std::vector<double> dl0 = dl, d0 = d, du0 = du, f = b;
    const int info = LAPACKE_dgtsv(LAPACK_COL_MAJOR, static_cast<int>(nn), 1,
                                   dl.data(), d.data(), du.data(), f.data(),
                                   static_cast<int>(nn));
    if (info != 0)
        throw NumericError("infinite_p_predictor: tridiagonal solve failed (" +
                           std::to_string(info) + ")");

    // Componentwise backward error max_i |A f - b|_i / (|A| |f| + |b|)_i of
    // the discrete system (the row scales vary over many orders of
    // magnitude, so a normwise residual would be meaningless).
    double res = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
        double af = d0[i] * f[i];
        double denom = std::abs(d0[i] * f[i]);
        if (i > 0) {
            af += dl0[i - 1] * f[i - 1];
            denom += std::abs(dl0[i - 1] * f[i - 1]);
        }
        if (i + 1 < nn) {
            af += du0[i] * f[i + 1];
            denom += std::abs(du0[i] * f[i + 1]);
        }
        denom += std::abs(b[i]) + 1e-300;
        res = std::max(res, std::abs(af - b[i]) / denom);
    }

    PredictorTable table;
    table.x = std::move(x);
    table.f.assign(1, 0.0);
    table.f.insert(table.f.end(), f.begin(), f.end());
    table.lambda_over_p = eta;
    table.residual = res;
    return table;
}

double characteristic_scale(const PredictorTable& table) {
    const std::size_t n = table.x.size();
    if (n < 8 || table.f.size() != n)
        throw ConfigError("characteristic_scale: malformed predictor table");
    double plateau = 0.0;
    for (double v : table.f) plateau = std::max(plateau, v);
    if (!(plateau > 0.0))
        throw NumericError("characteristic_scale: predictor has no positive "
                           "plateau");
    const double level = (1.0 - std::exp(-1.0)) * plateau;
    double ell = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        if (table.f[i] >= level) {
            const double f0 = table.f[i - 1], f1 = table.f[i];
            const double w = (level - f0) / (f1 - f0);
            ell = table.x[i - 1] + w * (table.x[i] - table.x[i - 1]);
            break;
        }
    }
    const double xm = table.x.back();
    if (ell < 0.0 || ell > defaults::kPlateauSeparation * xm)
        throw NumericError(
            "characteristic_scale: no plateau (rise scale not separated from "
            "the support half-width)");
    return ell;
}

// ---------------------------------------------------------------------------
// Exponent table
// ---------------------------------------------------------------------------

TheoryPrediction scaling_laws(double chi, double xi, int dim) {
    if (!(chi >= 0.0) || !std::isfinite(chi))
        throw ConfigError("scaling_laws: chi must be finite and >= 0");
    if (!(xi < 0.5 * (chi + 1.0)) || !std::isfinite(xi))
        throw ConfigError(
            "scaling_laws: xi must satisfy xi < (chi+1)/2 (target in L2)");
    if (dim < 1) throw ConfigError("scaling_laws: dim must be >= 1");
    if (dim >= 2 && xi != 0.0)
        throw ConfigError(
            "scaling_laws: the xi-dependent refinements exist in d = 1 only; "
            "use xi = 0 for d >= 2");

    const double d = static_cast<double>(dim);
    TheoryPrediction p;
    p.chi = chi;
    p.xi = xi;
    p.dim = dim;

    // Dimension-general classification exponents (they reduce to the 1-d
    // statements at d = 1).
    p.r_min_exponent = -1.0 / (d + chi);
    p.crossover_ridge_exponent = -1.0 / (d + chi);
    p.length_scale_exponent = 1.0 / (1.0 + d + chi);
    p.replica_ridge_exponent = (1.0 + chi) / (1.0 + d + chi);
    p.eigenvalue_slope = -(1.0 + 1.0 / d);
    p.lambda_p_exponent = -(1.0 + 1.0 / d);
    p.q_max_exponent = 1.0 / d;

    if (dim == 1) {
        // xi-refined one-dimensional laws.
        p.test_error_exponent = -1.0 + 2.0 * xi / (chi + 1.0);
        p.replica_ridgeless_exponent = -1.0 - (chi - 4.0 * xi) / (chi + 2.0);
        p.coeff_sq_slope = -(3.0 * chi + 4.0 - 4.0 * xi) / (chi + 2.0);
    } else {
        p.test_error_exponent = -(1.0 + chi) / (d + chi);
        p.replica_ridgeless_exponent =
            -(1.0 + 1.0 / d) * (1.0 + chi) / (1.0 + d + chi);
        // Tail-sum slope implied by the ridgeless error: summing c_rho^2
        // from rank P on must reproduce the exponent above (this is the
        // stated 1-d law when d = 1).
        p.coeff_sq_slope = -1.0 + p.replica_ridgeless_exponent;
    }
    return p;
}

}  // namespace krrlab
