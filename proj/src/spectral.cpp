// krrlab: spectral decomposition of the Laplace kernel operator on the
// singular data density.
// SPDX-License-Identifier: MIT

#include "krrlab/spectral.hpp"

#include <lapacke.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>

#include "krrlab/errors.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/specfun.hpp"

namespace krrlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Abscissa of the density maximum on [0, inf).
double density_peak_x(const Model& model) {
    return model.chi > 0.0 ? std::sqrt(model.chi / 2.0) : 0.0;
}

// Largest lambda admitting a classically allowed region:
// 2 p_max / (lambda sigma) = 1/sigma^2.
double lambda_ceiling(const Model& model) {
    return 2.0 * model.sigma * density(model, density_peak_x(model));
}

double phase_integrand(const Model& model, double lambda, double x) {
    const double g2 = gamma_sq(model, lambda, x);
    return g2 > 0.0 ? std::sqrt(g2) : 0.0;
}

// Shared tanh-sinh integrator (abscissa tables are built once).
boost::math::quadrature::tanh_sinh<double>& ts_integrator() {
    static boost::math::quadrature::tanh_sinh<double> q(12);
    return q;
}

}  // namespace

// ---------------------------------------------------------------------------
// WKB machinery
// ---------------------------------------------------------------------------

double gamma_sq(const Model& model, double lambda, double x) {
    const double s = model.sigma;
    return 2.0 * density(model, x) / (lambda * s) - 1.0 / (s * s);
}

TurningPoints turning_points(const Model& model, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ConfigError("turning_points: lambda must be positive and finite");
    const double xpk = density_peak_x(model);
    const double thr = lambda / (2.0 * model.sigma);  // density level at turning
    if (density(model, xpk) <= thr) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "no classically allowed region: lambda %.6g is at or "
                      "above the ceiling %.6g", lambda,
                      lambda_ceiling(model));
        throw NumericError(msg);
    }

    TurningPoints tp;
    // Inner turning point: density climbs through thr on (0, xpk).
    if (model.chi == 0.0) {
        tp.x1 = 0.0;
    } else {
        double lo = 0.0, hi = xpk;  // p(lo) = 0 < thr, p(hi) > thr
        while (true) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (density(model, mid) < thr ? lo : hi) = mid;
        }
        tp.x1 = 0.5 * (lo + hi);
    }
    // Outer turning point: density falls back through thr beyond the peak.
    double hi = std::max(xpk, 1.0);
    while (density(model, hi) > thr) hi *= 2.0;
    double lo = xpk;
    while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (density(model, mid) > thr ? lo : hi) = mid;
    }
    tp.x2 = 0.5 * (lo + hi);
    return tp;
}

double phase_integral(const Model& model, double lambda) {
    const TurningPoints tp = turning_points(model, lambda);
    auto f = [&](double x) { return phase_integrand(model, lambda, x); };
    return ts_integrator().integrate(f, tp.x1, tp.x2, 1e-10);
}

double phase_integral_to(const Model& model, double lambda, double x) {
    const TurningPoints tp = turning_points(model, lambda);
    if (x < tp.x1 || x > tp.x2)
        throw ConfigError("phase_integral_to: x outside the allowed region");
    auto f = [&](double t) { return phase_integrand(model, lambda, t); };
    // Gauss-Kronrod here (rather than tanh-sinh) keeps this an independent
    // cross-check of the full-interval phase integral.
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, tp.x1, x, 15, 1e-10);
}

double airy_matching_mu(const Model& model, double lambda) {
    const double chi = model.chi;
    if (chi == 0.0) return 0.0;
    // mu^3 = chi (lambda Gamma((1+chi)/2))^{2/chi} / (2^{2/chi} sigma^{2(1+chi)})
    const double log_mu3 =
        std::log(chi)
        + (2.0 / chi) * (std::log(lambda)
                         + specfun::log_gamma((1.0 + chi) / 2.0))
        - (2.0 / chi) * std::log(2.0)
        - 2.0 * (1.0 + chi) * std::log(model.sigma);
    return std::exp(log_mu3 / 3.0);
}

double scheme_gamma(const Model& model, double lambda, bool odd_rank) {
    const double mu = airy_matching_mu(model, lambda);
    const specfun::AiryPair a = specfun::airy(mu);
    return odd_rank ? a.ai / a.bi : a.aip / a.bip;
}

namespace {

// One self-consistent solve from an explicit positive seed.
double scheme_solve(const Model& model, int rank, double seed) {
    if (rank < 1)
        throw ConfigError("eigenvalue_scheme: rank must be >= 1");
    const bool odd = rank % 2 == 1;
    const int n = odd ? (rank - 1) / 2 : (rank - 2) / 2;
    const double ceil_lam = lambda_ceiling(model);

    double lam = std::min(seed, 0.25 * ceil_lam);
    double prev = lam;
    for (int it = 0; it < defaults::kSchemeMaxIter; ++it) {
        const double g = scheme_gamma(model, lam, odd);
        // The matching ratio fixes the quantization constant only modulo
        // pi; the branch is pinned by the lowest state, whose total phase
        // is 2 pi / 3 (odd) resp. 4 pi / 3 (even) in the small-mu limit.
        // The principal branch would undercount every level's phase by pi
        // and bias the whole ladder by a factor (1 + 4 / rank).
        const double denom = std::atan(-1.0 / g) + (n + 1) * kPi;
        // The quantization numerator integrand is sqrt(lambda) * sqrt(Gamma^2)
        // = sqrt(2 p / sigma - lambda / sigma^2); at the fixed point the total
        // phase int sqrt(Gamma^2) equals the quantization denominator.
        const double phi = std::sqrt(lam) * phase_integral(model, lam);
        const double next_raw = (phi / denom) * (phi / denom);
        if (!std::isfinite(next_raw) || next_raw <= 0.0) {
            char msg[192];
            std::snprintf(msg, sizeof msg,
                          "eigenvalue_scheme diverged at rank %d: iterates "
                          "%.9g -> %.9g", rank, prev, lam);
            throw NumericError(msg);
        }
        const double d = defaults::kSchemeDamping;
        double next = std::exp((1.0 - d) * std::log(lam)
                               + d * std::log(next_raw));
        next = std::min(next, 0.97 * ceil_lam);
        prev = lam;
        const double rel = std::fabs(next - lam) / lam;
        lam = next;
        if (rel < defaults::kSchemeRelTol) return lam;
    }
    char msg[192];
    std::snprintf(msg, sizeof msg,
                  "eigenvalue_scheme did not converge at rank %d within %d "
                  "iterations: iterates %.9g -> %.9g",
                  rank, defaults::kSchemeMaxIter, prev, lam);
    throw NumericError(msg);
}

}  // namespace

double eigenvalue_scheme(const Model& model, int rank) {
    return scheme_solve(model, rank, 0.25 * lambda_ceiling(model));
}

std::vector<double> eigenvalues_scheme(const Model& model,
                                       const std::vector<int>& ranks) {
    std::vector<double> out;
    out.reserve(ranks.size());
    double prev_lam = 0.0;
    int prev_rank = 0;
    for (int r : ranks) {
        double seed;
        if (prev_lam > 0.0) {
            // lambda ~ (half-rank)^{-2}: scale the previous converged value
            const double zp = prev_rank / 2 + 0.7;
            const double zn = r / 2 + 0.7;
            seed = prev_lam * (zp / zn) * (zp / zn);
        } else {
            seed = 0.25 * lambda_ceiling(model);
        }
        const double lam = scheme_solve(model, r, seed);
        out.push_back(lam);
        prev_lam = lam;
        prev_rank = r;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nystrom route
// ---------------------------------------------------------------------------

namespace {

// Eigenvalues (ascending) of a dense symmetric matrix, values only.
std::vector<double> sym_eigenvalues(std::vector<double>& a, int n) {
    std::vector<double> w(n);
    const int info =
        LAPACKE_dsyev(LAPACK_COL_MAJOR, 'N', 'U', n, a.data(), n, w.data());
    if (info != 0)
        throw NumericError("dsyev failed with info " + std::to_string(info));
    return w;
}

}  // namespace

GramSpectrum nystrom_eigenvalues(const Model& model,
                                 const std::vector<double>& xs,
                                 const std::vector<double>& ws) {
    const int n = static_cast<int>(xs.size());
    if (n < 2 || ws.size() != xs.size())
        throw ConfigError("nystrom_eigenvalues: need matching xs/ws, n >= 2");
    for (int i = 0; i + 1 < n; ++i)
        if (!(xs[i] < xs[i + 1]))
            throw ConfigError("nystrom_eigenvalues: points must be strictly "
                              "ascending");
    for (int i = 0; i < n; ++i) {
        if (xs[i] != -xs[n - 1 - i] || ws[i] != ws[n - 1 - i])
            throw ConfigError("nystrom_eigenvalues: point set is not "
                              "mirror-symmetric");
    }

    const bool has_zero = n % 2 == 1;  // the middle point pairs with itself
    const int m = n / 2;               // strictly positive points
    const int off = has_zero ? m + 1 : m;
    // sqrt(w p) factors for the symmetrized operator
    std::vector<double> sq(n);
    double trace = 0.0;
    for (int i = 0; i < n; ++i) {
        const double wp = ws[i] * density(model, xs[i]);
        sq[i] = std::sqrt(wp);
        trace += wp;
    }

    const int ne = m + (has_zero ? 1 : 0);
    std::vector<double> even(static_cast<std::size_t>(ne) * ne);
    std::vector<double> odd(static_cast<std::size_t>(m) * m);
    // Even block: optional zero point first, then the positive points, with
    // entries K(x_i, x_j) + K(x_i, -x_j) (cross terms sqrt(2)-weighted
    // against the self-paired zero).
    const double sg = model.sigma;
    for (int j = 0; j < m; ++j) {
        const double xj = xs[off + j];
        for (int i = 0; i <= j; ++i) {
            const double xi = xs[off + i];
            const double same = kernel_value(xj - xi, sg);
            const double cross = kernel_value(xj + xi, sg);
            const double f = sq[off + i] * sq[off + j];
            const int ei = has_zero ? i + 1 : i;
            const int ej = has_zero ? j + 1 : j;
            even[static_cast<std::size_t>(ej) * ne + ei] = f * (same + cross);
            odd[static_cast<std::size_t>(j) * m + i] = f * (same - cross);
        }
    }
    if (has_zero) {
        const int zi = m;  // index of the zero point in xs
        even[0] = sq[zi] * sq[zi];  // K(0,0) = 1
        const double rt2 = std::sqrt(2.0);
        for (int j = 0; j < m; ++j) {
            even[static_cast<std::size_t>(j + 1) * ne + 0] =
                rt2 * sq[zi] * sq[off + j] * kernel_value(xs[off + j], sg);
        }
    }

    std::vector<double> we = sym_eigenvalues(even, ne);
    std::vector<double> wo = sym_eigenvalues(odd, m);

    GramSpectrum gs;
    gs.values.reserve(n);
    gs.parity.reserve(n);
    int ie = ne - 1, io = m - 1;  // LAPACK returns ascending; merge descending
    while (ie >= 0 || io >= 0) {
        const bool take_even =
            io < 0 || (ie >= 0 && we[ie] >= wo[io]);
        if (take_even) {
            gs.values.push_back(we[ie]);
            gs.parity.push_back(+1);
            --ie;
        } else {
            gs.values.push_back(wo[io]);
            gs.parity.push_back(-1);
            --io;
        }
    }
    gs.trusted = n / defaults::kGramTrustDivisor;
    gs.trace = trace;
    return gs;
}

GramSpectrum eigenvalues_gram(const Model& model, int n_grid) {
    if (n_grid < 4 || n_grid % 2 != 0)
        throw ConfigError("eigenvalues_gram: grid size must be even and >= 4");
    const int m = n_grid / 2;
    const double h = 2.0 * model.x_max / n_grid;
    std::vector<double> xs(n_grid), ws(n_grid, h);
    // Build the positive half and mirror it exactly.
    for (int k = 0; k < m; ++k) {
        const double x = (k + 0.5) * h;
        xs[m + k] = x;
        xs[m - 1 - k] = -x;
    }
    return nystrom_eigenvalues(model, xs, ws);
}

double gram_rank_value(const GramSpectrum& gs, int rank) {
    if (rank < 1)
        throw ConfigError("gram_rank_value: rank must be >= 1");
    // Rank r is the (r+1)-th eigenvalue overall (the even ground state at
    // index 0 carries no rank).
    if (rank > gs.trusted)
        throw ConfigError("gram_rank_value: rank " + std::to_string(rank) +
                          " is outside the trusted window (" +
                          std::to_string(gs.trusted) + ")");
    return gs.values[rank];
}

// ---------------------------------------------------------------------------
// ODE route
// ---------------------------------------------------------------------------

namespace {

struct OdeState {
    double phi, dphi, q1, q2;
};

OdeState operator+(const OdeState& a, const OdeState& b) {
    return {a.phi + b.phi, a.dphi + b.dphi, a.q1 + b.q1, a.q2 + b.q2};
}
OdeState operator*(double c, const OdeState& a) {
    return {c * a.phi, c * a.dphi, c * a.q1, c * a.q2};
}

// Right-hand side of the eigenfunction system with quadrature states.
struct EigenRhs {
    const Model& model;
    double lambda;
    bool with_proj;  // integrate the f* projection state (odd parity only)

    OdeState operator()(double x, const OdeState& u) const {
        const double p = density(model, x);
        OdeState d;
        d.phi = u.dphi;
        d.dphi = (1.0 / (model.sigma * model.sigma)
                  - 2.0 * p / (lambda * model.sigma)) * u.phi;
        d.q1 = p * u.phi * u.phi;
        // p f* phi -> 0 as x -> 0 (exponent 1 + chi - xi > 0 for odd phi)
        d.q2 = (with_proj && x > 0.0) ? p * target(model, x) * u.phi : 0.0;
        return d;
    }
};

}  // namespace

double ode_far_boundary(const Model& model, double lambda) {
    const TurningPoints tp = turning_points(model, lambda);
    const double thr = defaults::kFarBoundaryDrop * lambda / (2.0 * model.sigma);
    double hi = tp.x2 + 0.5;
    while (density(model, hi) > thr) hi += 0.5;
    return std::max(hi, tp.x2 + 1.0);
}

OdeSolution integrate_eigen_ode(const Model& model, double lambda, bool odd,
                                double x_end, double rel_tol,
                                const std::vector<double>& grid) {
    if (!(lambda > 0.0) || !(x_end > 0.0))
        throw ConfigError("integrate_eigen_ode: lambda and x_end must be "
                          "positive");
    const EigenRhs rhs{model, lambda, odd};
    const double atol = defaults::kOdeAbsTol;

    // Dormand-Prince 5(4) tableau.
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                        c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // embedded 4th-order error weights (b - bhat)
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                        e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeSolution out;
    OdeState u{odd ? 0.0 : 1.0, odd ? 1.0 : 0.0, 0.0, 0.0};
    double x = 0.0;
    std::size_t next_node = 0;
    if (!grid.empty()) {
        out.x.reserve(grid.size());
        out.phi.reserve(grid.size());
        out.dphi.reserve(grid.size());
        if (grid.front() == 0.0) {
            out.x.push_back(0.0);
            out.phi.push_back(u.phi);
            out.dphi.push_back(u.dphi);
            next_node = 1;
        }
    } else {
        out.x.push_back(0.0);
        out.phi.push_back(u.phi);
        out.dphi.push_back(u.dphi);
    }

    OdeState k1 = rhs(x, u);
    double h = std::min(1e-3, x_end * 1e-3);
    double err_prev = 1.0;
    double last_sign = u.phi;  // sign tracking for zero counting
    double peak_osc = 0.0;     // max |phi| inside the allowed region
    const long max_steps = 4000000;
    for (long step = 0; step < max_steps; ++step) {
        if (x >= x_end) break;
        bool hit_node = false;
        if (!grid.empty() && next_node < grid.size()
            && x + h >= grid[next_node]) {
            h = grid[next_node] - x;
            hit_node = true;
        }
        if (x + h > x_end) {
            h = x_end - x;
            hit_node = false;
        }
        if (h < 1e-14)
            throw NumericError("integrate_eigen_ode: step size underflow");

        const OdeState k2 = rhs(x + c2 * h, u + (h * a21) * k1);
        const OdeState k3 = rhs(x + c3 * h, u + h * (a31 * k1 + a32 * k2));
        const OdeState k4 =
            rhs(x + c4 * h, u + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const OdeState k5 = rhs(
            x + c5 * h, u + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const OdeState k6 =
            rhs(x + h, u + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4
                                + a65 * k5));
        const OdeState u5 =
            u + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const OdeState k7 = rhs(x + h, u5);  // FSAL
        const OdeState ed = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5
                                 + e6 * k6 + e7 * k7);

        auto comp = [&](double e, double a, double b2v) {
            return e / (atol + rel_tol * std::max(std::fabs(a),
                                                  std::fabs(b2v)));
        };
        const double r0 = comp(ed.phi, u.phi, u5.phi);
        const double r1 = comp(ed.dphi, u.dphi, u5.dphi);
        const double r2 = comp(ed.q1, u.q1, u5.q1);
        const double r3 = comp(ed.q2, u.q2, u5.q2);
        const double err = std::sqrt(
            (r0 * r0 + r1 * r1 + r2 * r2 + r3 * r3) / 4.0);

        if (err <= 1.0) {  // accept
            x += h;
            u = u5;
            k1 = k7;
            if (u.phi * last_sign < 0.0) {
                ++out.zeros;
                last_sign = u.phi;
            } else if (u.phi != 0.0) {
                last_sign = u.phi;
            }
            const double ap = std::fabs(u.phi);
            if (gamma_sq(model, lambda, x) > 0.0) {
                peak_osc = std::max(peak_osc, ap);
            } else if (peak_osc > 0.0
                       && ap > defaults::kOdeBlowupFactor * peak_osc) {
                out.truncated = true;
            }
            out.peak = std::max(out.peak, ap);
            if (grid.empty()) {
                out.x.push_back(x);
                out.phi.push_back(u.phi);
                out.dphi.push_back(u.dphi);
            } else if (hit_node) {
                out.x.push_back(x);
                out.phi.push_back(u.phi);
                out.dphi.push_back(u.dphi);
                ++next_node;
            }
            if (out.truncated) break;
        }
        // PI step-size update (Hairer-style exponents for order 5)
        const double safe = 0.9;
        double fac = safe * std::pow(std::max(err, 1e-10), -0.7 / 5.0)
                     * std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0);
        fac = std::min(5.0, std::max(0.2, fac));
        if (err > 1.0) fac = std::min(fac, 1.0);  // never grow on reject
        h *= fac;
        if (err <= 1.0) err_prev = std::max(err, 1e-10);
    }
    if (x < x_end && !out.truncated)
        throw NumericError("integrate_eigen_ode: step limit exceeded");

    out.norm_half = u.q1;
    out.proj_half = u.q2;
    // Normalized decay mismatch: the coefficient of the growing tail mode,
    // extracted as phi' + kappa phi with the local decay rate kappa.
    const double g2 = gamma_sq(model, lambda, x);
    const double kap = std::sqrt(std::max(-g2, 1e-300));
    const double scale = kap * std::max(peak_osc, 1e-300);
    out.mismatch = (u.dphi + kap * u.phi) / scale;
    return out;
}

namespace {

// Trust-window secant on the far-boundary decay mismatch.
//
// The mismatch vanishes exactly at eigenvalues of the full-line problem:
// the far boundary lies beyond the support of the density, where the
// pure-decay direction of the homogeneous equation is exact.  Level
// identity, however, cannot be pinned by interior zero counts: with a
// kernel range much wider than the data scale the forbidden region decays
// at rate 1/sigma, so the outermost zero of a near-eigenstate drifts
// through the soft far shoulder and the count at the root is off by one
// within a hair's width of lambda.  The caller must therefore supply a
// seed whose relative error is below trust_rel, and trust_rel itself must
// sit below half the relative level spacing (about 2 / rank); inside such
// a window the mismatch has exactly one root, and it is the wanted one.
Eigenpair polish_eigenpair(const Model& model, int rank, double seed,
                           double trust_rel, double rel_tol) {
    const bool odd = rank % 2 == 1;
    const int want_zeros = rank / 2;
    const double ceil_lam = lambda_ceiling(model);
    const double lam0 = std::min(seed, 0.5 * ceil_lam);
    const double trust = std::min(trust_rel, 0.5);
    const double lo = lam0 * (1.0 - trust);
    const double hi = std::min(lam0 * (1.0 + trust), 0.97 * ceil_lam);
    const double x_end = ode_far_boundary(model, 0.8 * lam0);
    // The mismatch carries integration noise of order rel_tol, so lambda
    // cannot be pinned tighter than that.
    const double conv_rel = std::max(defaults::kPolishRelTol, rel_tol);

    Eigenpair best;
    best.rank = rank;
    double best_m = std::numeric_limits<double>::infinity();
    int solves = 0;
    auto eval = [&](double lam) {
        OdeSolution sol = integrate_eigen_ode(model, lam, odd, x_end, rel_tol);
        ++solves;
        const double m = sol.mismatch;
        if (std::fabs(m) < best_m) {
            best_m = std::fabs(m);
            best.lambda = lam;
            best.sol = std::move(sol);
        }
        return m;
    };

    // Tightest opposite-sign pair seen so far (smallest |m| on each side).
    double l_neg = 0.0, m_neg = 0.0, l_pos = 0.0, m_pos = 0.0;
    double blo = lo, bhi = hi;  // current root bracket
    double prev_l = 0.0, prev_m = 0.0;
    bool have_prev = false;
    bool converged = false;
    double lam = lam0;

    while (solves < defaults::kPolishMaxSolves) {
        const double m = eval(lam);
        if (best_m < 1e-12) { converged = true; break; }
        if (m < 0.0) {
            if (l_neg == 0.0 || -m < -m_neg) { l_neg = lam; m_neg = m; }
        } else {
            if (l_pos == 0.0 || m < m_pos) { l_pos = lam; m_pos = m; }
        }
        if (l_neg > 0.0 && l_pos > 0.0) {
            blo = std::min(l_neg, l_pos);
            bhi = std::max(l_neg, l_pos);
            if (bhi - blo <= conv_rel * lam) { converged = true; break; }
        }

        double next;
        if (have_prev && m != prev_m) {
            next = lam - m * (lam - prev_l) / (m - prev_m);
        } else {
            // Second probe: a fixed fraction of the window, above the
            // integration noise, to start the secant.
            next = lam * (1.0 + std::max(0.05 * trust, 16.0 * conv_rel));
        }
        if (!(next > blo) || !(next < bhi) || !std::isfinite(next)) {
            next = std::sqrt(blo * bhi);  // geometric bisection
            if (!(next > 0.0)) next = 0.5 * (blo + bhi);
        }
        prev_l = lam;
        prev_m = m;
        have_prev = true;
        if (std::fabs(next - lam) <= conv_rel * lam
            && l_neg > 0.0 && l_pos > 0.0) {
            converged = true;
            break;
        }
        // Without a sign change after several probes, check the window
        // edges explicitly: equal signs there mean the seed missed.
        if (solves >= 8 && (l_neg == 0.0 || l_pos == 0.0)) {
            const double me1 = eval(lo * (1.0 + 1e-9));
            const double me2 = eval(hi * (1.0 - 1e-9));
            if (me1 * me2 > 0.0) {
                char msg[192];
                std::snprintf(msg, sizeof msg,
                              "eigenvalue polish: no eigenvalue inside the "
                              "trust window at rank %d (seed %.9g, trust "
                              "%.3g); the seed is not accurate enough",
                              rank, seed, trust);
                throw NumericError(msg);
            }
            if (me1 < 0.0) { l_neg = lo * (1.0 + 1e-9); m_neg = me1; }
            else           { l_pos = lo * (1.0 + 1e-9); m_pos = me1; }
            if (me2 < 0.0) { l_neg = hi * (1.0 - 1e-9); m_neg = me2; }
            else           { l_pos = hi * (1.0 - 1e-9); m_pos = me2; }
            blo = std::min(l_neg, l_pos);
            bhi = std::max(l_neg, l_pos);
            next = std::sqrt(blo * bhi);
            have_prev = false;
        }
        lam = next;
    }
    if (!converged || !(best.lambda > 0.0)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "eigenvalue polish did not converge at rank %d "
                      "(last lambda %.9g)", rank, lam);
        throw NumericError(msg);
    }
    // The count at the root is ambiguous by one (soft far shoulder); a
    // larger discrepancy means the window held the wrong level after all.
    if (std::abs(best.sol.zeros - want_zeros) > 1) {
        char msg[192];
        std::snprintf(msg, sizeof msg,
                      "eigenvalue polish at rank %d converged to a state "
                      "with %d sign changes (expected about %d); the seed "
                      "pointed at the wrong level",
                      rank, best.sol.zeros, want_zeros);
        throw NumericError(msg);
    }
    return best;
}

// Quadratic extrapolation of log(lambda) against log(rank) through the
// last three converged points; the spectrum is smooth in these variables,
// so a three-point fit predicts the next same-parity level far more
// tightly than the local level spacing.
double extrapolate_rank(const double* rho, const double* lam, double next) {
    const double t0 = std::log(rho[0]), t1 = std::log(rho[1]),
                 t2 = std::log(rho[2]), t = std::log(next);
    const double y0 = std::log(lam[0]), y1 = std::log(lam[1]),
                 y2 = std::log(lam[2]);
    const double c0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
    const double c1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
    const double c2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
    return std::exp(c0 * y0 + c1 * y1 + c2 * y2);
}

// Shared gram(2000) seed cache for direct low-rank polish calls.
double gram_seed_cached(const Model& model, int rank) {
    static thread_local std::pair<Model, GramSpectrum> cache{Model{},
                                                             GramSpectrum{}};
    if (cache.second.values.empty() || cache.first.chi != model.chi
        || cache.first.sigma != model.sigma
        || cache.first.x_max != model.x_max) {
        cache.first = model;
        cache.second = eigenvalues_gram(model, defaults::kSeedGramGrid);
    }
    return gram_rank_value(cache.second, rank);
}

}  // namespace

Eigenpair eigenpair_ode(const Model& model, int rank, double seed,
                        double rel_tol) {
    if (rank < 1) throw ConfigError("eigenpair_ode: rank must be >= 1");
    if (seed <= 0.0)
        seed = rank <= defaults::kSeedGramMaxRank
                   ? gram_seed_cached(model, rank)
                   : eigenvalue_scheme(model, rank);
    return polish_eigenpair(model, rank, seed, 1.0 / rank, rel_tol);
}

double project_coefficient(const Model& model, const Eigenpair& pair) {
    if (pair.rank % 2 == 0) return 0.0;  // even eigenfunction, odd target
    if (!(pair.sol.norm_half > 0.0))
        throw NumericError("project_coefficient: unnormalizable eigenfunction");
    (void)model;
    // Full-line integrals are twice the half-line quadrature states (both
    // p phi^2 and p f* phi are even for an odd eigenfunction).
    return std::sqrt(2.0) * pair.sol.proj_half
           / std::sqrt(pair.sol.norm_half);
}

double eigenpair_residual(const Model& model, double lambda,
                          const std::vector<double>& xs,
                          const std::vector<double>& ws,
                          const std::vector<double>& phi) {
    const std::size_t n = xs.size();
    if (n < 2 || ws.size() != n || phi.size() != n)
        throw ConfigError("eigenpair_residual: size mismatch");
    if (!(lambda > 0.0))
        throw ConfigError("eigenpair_residual: lambda must be positive");
    std::vector<double> v(n), wp(n);
    for (std::size_t i = 0; i < n; ++i) {
        wp[i] = ws[i] * density(model, xs[i]);
        v[i] = wp[i] * phi[i];
    }
    const std::vector<double> tphi = laplace_matvec_1d(xs, v, model.sigma);
    double r2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = tphi[i] - lambda * phi[i];
        r2 += wp[i] * d * d;
        n2 += wp[i] * phi[i] * phi[i];
    }
    if (!(n2 > 0.0))
        throw NumericError("eigenpair_residual: zero-norm eigenfunction");
    return std::sqrt(r2 / n2) / lambda;
}

VerificationGrid eigenpair_on_grid(const Model& model, const Eigenpair& pair,
                                   int half_points) {
    if (half_points < 16)
        throw ConfigError("eigenpair_on_grid: need at least 16 points");
    const double x_end = pair.sol.x.back();
    const double h = x_end / half_points;
    std::vector<double> half(half_points);
    for (int k = 0; k < half_points; ++k) half[k] = (k + 0.5) * h;

    const bool odd = pair.rank % 2 == 1;
    OdeSolution sol = integrate_eigen_ode(model, pair.lambda, odd, x_end,
                                          defaults::kOdeRelTol, half);
    if (sol.x.size() != half.size())
        throw NumericError("eigenpair_on_grid: integration did not reach all "
                           "grid nodes");

    VerificationGrid g;
    const int n = 2 * half_points;
    g.xs.resize(n);
    g.ws.assign(n, h);
    g.phi.resize(n);
    for (int k = 0; k < half_points; ++k) {
        g.xs[half_points + k] = half[k];
        g.phi[half_points + k] = sol.phi[k];
        g.xs[half_points - 1 - k] = -half[k];
        g.phi[half_points - 1 - k] = odd ? -sol.phi[k] : sol.phi[k];
    }
    return g;
}

// ---------------------------------------------------------------------------
// WKB bulk
// ---------------------------------------------------------------------------

WkbWindow wkb_window(const Model& model, double lambda) {
    const TurningPoints tp = turning_points(model, lambda);
    WkbWindow w;
    w.lo = defaults::kWkbWindowZeta
           * std::pow(lambda, 1.0 / (2.0 + model.chi));
    const double l = std::max(-std::log(lambda), 0.1);
    w.hi = tp.x2 - defaults::kWkbWindowDelta / std::sqrt(l);
    return w;
}

std::vector<double> wkb_bulk(const Model& model, double lambda, bool odd_rank,
                             const std::vector<double>& xs) {
    const TurningPoints tp = turning_points(model, lambda);
    const double g = scheme_gamma(model, lambda, odd_rank);
    std::vector<double> out;
    out.reserve(xs.size());
    double phase = kPi / 4.0;
    double prev = tp.x1;
    auto f = [&](double t) { return phase_integrand(model, lambda, t); };
    for (double x : xs) {
        if (x <= tp.x1 || x >= tp.x2)
            throw ConfigError("wkb_bulk: abscissa outside the allowed region");
        if (x < prev)
            throw ConfigError("wkb_bulk: abscissae must be ascending");
        phase += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, prev, x, 12, 1e-11);
        prev = x;
        const double g2 = gamma_sq(model, lambda, x);
        const double amp = std::pow(g2, -0.25);
        out.push_back(amp * (std::sin(phase) - g * std::cos(phase)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum assembly
// ---------------------------------------------------------------------------

const char* rank_source_name(RankSource s) {
    switch (s) {
        case RankSource::kGram: return "gram";
        case RankSource::kScheme: return "scheme";
        case RankSource::kExact: return "exact";
        case RankSource::kExtrapolated: return "extrapolated";
        case RankSource::kParity: return "parity";
    }
    return "unknown";
}

TailFit fit_coefficient_tail(const std::vector<int>& ranks,
                             const std::vector<double>& coeffs) {
    if (ranks.size() != coeffs.size())
        throw ConfigError("fit_coefficient_tail: size mismatch");
    std::vector<std::pair<double, double>> pts;  // (ln rank, ln c^2)
    int max_rank = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (coeffs[i] != 0.0) max_rank = std::max(max_rank, ranks[i]);
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (coeffs[i] == 0.0 || ranks[i] * 10 < max_rank) continue;
        pts.emplace_back(std::log(static_cast<double>(ranks[i])),
                         std::log(coeffs[i] * coeffs[i]));
    }
    if (pts.size() < 10)
        throw ConfigError("fit_coefficient_tail: insufficient data (need at "
                          "least 10 nonzero coefficients in the top decade, "
                          "got " + std::to_string(pts.size()) + ")");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [lx, ly] : pts) {
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(pts.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    TailFit fit;
    fit.index = -slope;
    fit.amp = std::exp(icept);
    return fit;
}

Spectrum assemble_spectrum(const Model& model, const SpectrumOptions& opts) {
    model.validate();
    if (opts.gram_ranks < 2 || opts.gram_ranks > opts.exact_ranks
        || opts.exact_ranks > opts.target_ranks)
        throw ConfigError("assemble_spectrum: need 2 <= gram_ranks <= "
                          "exact_ranks <= target_ranks");
    if (opts.gram_grid / defaults::kGramTrustDivisor < opts.gram_ranks)
        throw ConfigError("assemble_spectrum: gram_grid too small for the "
                          "requested gram_ranks (trusted window)");

    Spectrum sp;
    sp.rows.resize(opts.target_ranks);

    // Eigenvalues: Gram for low ranks, scheme above.
    const GramSpectrum gs = eigenvalues_gram(model, opts.gram_grid);
    for (int r = 1; r <= opts.gram_ranks; ++r) {
        SpectrumRow& row = sp.rows[r - 1];
        row.rank = r;
        row.parity = r % 2 == 1 ? -1 : +1;
        row.eigenvalue = gram_rank_value(gs, r);
        row.eigenvalue_source = RankSource::kGram;
    }
    std::vector<int> scheme_ranks;
    scheme_ranks.reserve(opts.target_ranks - opts.gram_ranks);
    for (int r = opts.gram_ranks + 1; r <= opts.target_ranks; ++r)
        scheme_ranks.push_back(r);
    const std::vector<double> scheme_vals =
        eigenvalues_scheme(model, scheme_ranks);
    for (std::size_t i = 0; i < scheme_ranks.size(); ++i) {
        SpectrumRow& row = sp.rows[scheme_ranks[i] - 1];
        row.rank = scheme_ranks[i];
        row.parity = scheme_ranks[i] % 2 == 1 ? -1 : +1;
        row.eigenvalue = scheme_vals[i];
        row.eigenvalue_source = RankSource::kScheme;
    }

    // Coefficients: exact ODE projection at odd ranks (polish cascade with
    // warm seeds extrapolated along the odd ladder), structural zeros at
    // even ranks.  Consecutive odd levels sit two ranks apart, so a
    // log-log extrapolation through the last three polished eigenvalues
    // predicts the next one far inside its trust window.
    std::vector<int> exact_ranks;
    std::vector<double> exact_coeffs;
    double rho_h[3] = {0.0, 0.0, 0.0};
    double lam_h[3] = {0.0, 0.0, 0.0};
    int n_h = 0;
    for (int r = 1; r <= opts.exact_ranks; ++r) {
        SpectrumRow& row = sp.rows[r - 1];
        if (r % 2 == 0) {
            row.coefficient = 0.0;
            row.coefficient_source = RankSource::kParity;
            continue;
        }
        // Seed: quadratic continuation along the odd ladder once three
        // levels are polished; before that, the assembled eigenvalue row
        // (Gram at low ranks, scheme above) is well inside the 1/rank
        // trust window.
        const double seed =
            n_h >= 3 ? extrapolate_rank(rho_h, lam_h, static_cast<double>(r))
                     : row.eigenvalue;
        const Eigenpair pair =
            eigenpair_ode(model, r, seed, opts.projection_tol);
        row.coefficient = project_coefficient(model, pair);
        row.coefficient_source = RankSource::kExact;
        if (n_h < 3) {
            rho_h[n_h] = static_cast<double>(r);
            lam_h[n_h] = pair.lambda;
            ++n_h;
        } else {
            rho_h[0] = rho_h[1]; rho_h[1] = rho_h[2];
            lam_h[0] = lam_h[1]; lam_h[1] = lam_h[2];
            rho_h[2] = static_cast<double>(r);
            lam_h[2] = pair.lambda;
        }
        exact_ranks.push_back(r);
        exact_coeffs.push_back(row.coefficient);
    }

    // Power-law tail beyond the exact window.
    if (opts.target_ranks > opts.exact_ranks) {
        const TailFit fit = fit_coefficient_tail(exact_ranks, exact_coeffs);
        sp.tail_amp = fit.amp;
        sp.tail_index = fit.index;
        for (int r = opts.exact_ranks + 1; r <= opts.target_ranks; ++r) {
            SpectrumRow& row = sp.rows[r - 1];
            if (r % 2 == 0) {
                row.coefficient = 0.0;
                row.coefficient_source = RankSource::kParity;
            } else {
                row.coefficient = std::sqrt(
                    fit.amp * std::pow(static_cast<double>(r), -fit.index));
                row.coefficient_source = RankSource::kExtrapolated;
            }
        }
    }
    return sp;
}

}  // namespace krrlab
