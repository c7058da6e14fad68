// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT

#include "krrlab/krr.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "krrlab/errors.hpp"

namespace krrlab {

namespace {

double point_distance(const double* a, const double* b, int width) {
    double s = 0.0;
    for (int k = 0; k < width; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

double effective_ridge(double ridge, double floor) {
    if (ridge < 0.0 || !std::isfinite(ridge)) {
        char msg[96];
        std::snprintf(msg, sizeof msg,
                      "fit: ridge must be >= 0 (got %.6g)", ridge);
        throw ConfigError(msg);
    }
    return std::max(ridge, floor);
}

/// Thomas solve of a symmetric tridiagonal SPD system.
std::vector<double> thomas_solve(const Tridiag& t, std::vector<double> rhs) {
    const int n = static_cast<int>(t.diag.size());
    std::vector<double> c(n > 1 ? n - 1 : 0);
    std::vector<double> d(n);
    d[0] = t.diag[0];
    for (int i = 0; i + 1 < n; ++i) {
        c[i] = t.off[i] / d[i];
        d[i + 1] = t.diag[i + 1] - t.off[i] * c[i];
    }
    for (int i = 1; i < n; ++i) rhs[i] -= c[i - 1] * rhs[i - 1];
    rhs[n - 1] /= d[n - 1];
    for (int i = n - 2; i >= 0; --i) {
        rhs[i] = rhs[i] / d[i] - c[i] * rhs[i + 1];
    }
    return rhs;
}

std::vector<double> tridiag_matvec(const Tridiag& t,
                                   const std::vector<double>& v) {
    const int n = static_cast<int>(t.diag.size());
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
        double s = t.diag[i] * v[i];
        if (i > 0) s += t.off[i - 1] * v[i - 1];
        if (i + 1 < n) s += t.off[i] * v[i + 1];
        r[i] = s;
    }
    return r;
}

/// Sorted view of a 1-d sample: points ascending, labels permuted along.
void sorted_1d(const SampleSet& s, std::vector<double>& xs,
               std::vector<double>& ys) {
    const int n = s.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return s.x[a] < s.x[b]; });
    xs.resize(n);
    ys.resize(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = s.x[idx[i]];
        ys[i] = s.y[idx[i]];
    }
}

}  // namespace

GramMatrix gram(const SampleSet& s, double sigma) {
    if (!(sigma > 0.0)) {
        throw ConfigError("gram: sigma must be positive");
    }
    const int n = s.size();
    GramMatrix K;
    K.n = n;
    K.a.assign(static_cast<long>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        K.a[static_cast<long>(j) * n + j] = 1.0;
        for (int i = j + 1; i < n; ++i) {
            const double v =
                kernel_value(point_distance(s.point(i), s.point(j), s.width),
                             sigma);
            K.a[static_cast<long>(j) * n + i] = v;
            K.a[static_cast<long>(i) * n + j] = v;
        }
    }
    return K;
}

std::vector<double> fit(const GramMatrix& K, const std::vector<double>& y,
                        double ridge, double ridge_floor) {
    const int n = K.n;
    if (static_cast<int>(y.size()) != n) {
        throw ConfigError("fit: label count does not match the Gram size");
    }
    if (n < 1) throw ConfigError("fit: empty system");
    const double lam = effective_ridge(ridge, ridge_floor);

    // factor a copy; the caller's matrix stays intact for the residual check
    std::vector<double> a = K.a;
    for (int i = 0; i < n; ++i) a[static_cast<long>(i) * n + i] += lam;
    const int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, a.data(), n);
    if (info > 0) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "fit: factorization failed at pivot %d (pivot value "
                      "%.6g <= 0); matrix not positive definite at this "
                      "ridge", info,
                      a[static_cast<long>(info - 1) * n + (info - 1)]);
        throw NumericError(msg);
    }
    if (info < 0) {
        throw NumericError("fit: invalid argument passed to dpotrf");
    }
    std::vector<double> alpha = y;
    LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, a.data(), n, alpha.data(), n);

    // Residual check against the caller's (unfactored) matrix.  The gate is
    // 1e-8 ||y||_inf plus the backward-stability term of the factorization,
    // eps * n * (||K||_inf + lam) * ||alpha||_inf, so a well-posed solve of
    // any size passes while a wrong answer (or a genuinely broken system)
    // is still flagged.
    double ymax = 0.0, rmax = 0.0, amax = 0.0, kinf = 0.0;
    for (double v : y) ymax = std::max(ymax, std::abs(v));
    for (double v : alpha) amax = std::max(amax, std::abs(v));
    for (int i = 0; i < n; ++i) {
        double r = lam * alpha[i] - y[i];
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            const double kij = K.a[static_cast<long>(j) * n + i];
            r += kij * alpha[j];
            row += std::abs(kij);
        }
        rmax = std::max(rmax, std::abs(r));
        kinf = std::max(kinf, row);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    const double tol = 1e-8 * std::max(ymax, 1e-300)
                     + 128.0 * eps * n * ((kinf + lam) * amax + ymax);
    if (rmax > tol) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "fit: solve residual %.3g exceeds tolerance %.3g; "
                      "system too ill-conditioned", rmax, tol);
        throw NumericError(msg);
    }
    return alpha;
}

Tridiag laplace_precision_1d(const std::vector<double>& xs, double sigma) {
    const int n = static_cast<int>(xs.size());
    if (n < 1) throw ConfigError("laplace_precision_1d: empty point set");
    Tridiag t;
    t.diag.assign(n, 1.0);
    t.off.assign(n > 1 ? n - 1 : 0, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        const double gap = xs[i + 1] - xs[i];
        if (!(gap > 0.0)) {
            throw ConfigError(
                "laplace_precision_1d: points must be strictly increasing");
        }
        const double r = std::exp(-gap / sigma);
        const double e = -std::expm1(-2.0 * gap / sigma);  // 1 - r^2, stable
        t.off[i] = -r / e;
        // the AR-chain precision adds r^2/(1-r^2) to both gap neighbors
        t.diag[i] += r * r / e;
        t.diag[i + 1] += r * r / e;
    }
    return t;
}

std::vector<double> laplace_matvec_1d(const std::vector<double>& xs,
                                      const std::vector<double>& v,
                                      double sigma) {
    const int n = static_cast<int>(xs.size());
    if (static_cast<int>(v.size()) != n) {
        throw ConfigError("laplace_matvec_1d: size mismatch");
    }
    std::vector<double> out(n, 0.0);
    // L_i = sum_{j <= i} v_j e^{-(x_i - x_j)/sigma}, built by decay-and-add
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i > 0) acc *= std::exp(-(xs[i] - xs[i - 1]) / sigma);
        acc += v[i];
        out[i] = acc;
    }
    // R_i = sum_{j > i} v_j e^{-(x_j - x_i)/sigma}
    acc = 0.0;
    for (int i = n - 2; i >= 0; --i) {
        acc = (acc + v[i + 1]) * std::exp(-(xs[i + 1] - xs[i]) / sigma);
        out[i] += acc;
    }
    return out;
}

Fit fit_krr(const Model& model, const SampleSet& s, double ridge,
            const FitOptions& opts) {
    if (s.size() < 1) throw ConfigError("fit: empty sample");
    const double lam = effective_ridge(ridge, opts.ridge_floor);
    const double sigma = model.sigma;

    Fit f;
    f.width = s.width;
    f.sigma = sigma;
    f.ridge = lam;

    bool fast = !opts.force_dense && s.width == 1;
    std::vector<double> xs, ys;
    if (fast) {
        sorted_1d(s, xs, ys);
        const double range = xs.back() - xs.front();
        if (range / sigma > opts.overflow_guard) fast = false;
        for (int i = 0; fast && i + 1 < s.size(); ++i) {
            if (xs[i + 1] - xs[i] < opts.duplicate_gap_rel * sigma) {
                fast = false;  // (near-)duplicate points: dense fallback
            }
        }
    }

    if (fast) {
        // (K + lam I)^{-1} = (I + lam K^{-1})^{-1} K^{-1} with K^{-1}
        // tridiagonal: one tridiagonal matvec and one Thomas solve.
        const Tridiag prec = laplace_precision_1d(xs, sigma);
        Tridiag b = prec;
        for (auto& v : b.diag) v = 1.0 + lam * v;
        for (auto& v : b.off) v *= lam;
        std::vector<double> w = tridiag_matvec(prec, ys);
        std::vector<double> alpha = thomas_solve(b, std::move(w));

        // Exact residual check via the O(P) kernel matvec.  The Thomas solve
        // is backward stable on I + lam*T, and mapping that error through K
        // gives a residual of order eps ||K||_inf ||T||_inf (lam ||alpha|| +
        // ||y||); gate at 1e-8 ||y||_inf plus that conditioning term.
        const std::vector<double> ka = laplace_matvec_1d(xs, alpha, sigma);
        double ymax = 0.0, rmax = 0.0, amax = 0.0;
        for (double v : ys) ymax = std::max(ymax, std::abs(v));
        for (double v : alpha) amax = std::max(amax, std::abs(v));
        for (int i = 0; i < s.size(); ++i) {
            rmax = std::max(rmax,
                            std::abs(ka[i] + lam * alpha[i] - ys[i]));
        }
        const std::vector<double> krow =
            laplace_matvec_1d(xs, std::vector<double>(xs.size(), 1.0), sigma);
        double kinf = 0.0, tinf = 0.0;
        for (double v : krow) kinf = std::max(kinf, v);
        for (int i = 0; i < s.size(); ++i) {
            double row = std::abs(prec.diag[i]);
            if (i > 0) row += std::abs(prec.off[i - 1]);
            if (i + 1 < s.size()) row += std::abs(prec.off[i]);
            tinf = std::max(tinf, row);
        }
        const double eps = std::numeric_limits<double>::epsilon();
        const double tol = 1e-8 * std::max(ymax, 1e-300)
                         + 128.0 * eps * kinf * tinf * (lam * amax + ymax);
        if (rmax > tol) {
            char msg[128];
            std::snprintf(msg, sizeof msg,
                          "fit: tridiagonal residual %.3g exceeds tolerance "
                          "%.3g", rmax, tol);
            throw NumericError(msg);
        }
        f.route = FitRoute::kFast1d;
        f.points = std::move(xs);
        f.alpha = std::move(alpha);
        return f;
    }

    f.route = FitRoute::kDense;
    f.points = s.x;
    f.alpha = fit(gram(s, sigma), s.y, ridge, opts.ridge_floor);
    return f;
}

double predict(const Fit& f, const double* point) {
    const int n = static_cast<int>(f.alpha.size());
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += f.alpha[i] *
             kernel_value(point_distance(
                              f.points.data() + static_cast<long>(i) * f.width,
                              point, f.width),
                          f.sigma);
    }
    return s;
}

std::vector<double> predict_sorted_1d(const Fit& f,
                                      const std::vector<double>& q) {
    if (f.width != 1) {
        throw ConfigError("predict_sorted_1d: predictor is not 1-d");
    }
    // ensure ascending training order regardless of route
    std::vector<double> xs = f.points, al = f.alpha;
    if (f.route != FitRoute::kFast1d) {
        std::vector<int> idx(xs.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return f.points[a] < f.points[b]; });
        for (std::size_t i = 0; i < idx.size(); ++i) {
            xs[i] = f.points[idx[i]];
            al[i] = f.alpha[idx[i]];
        }
    }
    const int n = static_cast<int>(xs.size());
    const int m = static_cast<int>(q.size());
    std::vector<double> out(m);
    // sweep: maintain left accumulator decayed to the current query, and a
    // right accumulator decayed from the right end backwards
    std::vector<double> right(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        // right[i] = sum_{j >= i} alpha_j e^{-(x_j - x_i)/sigma}
        right[i] = al[i];
        if (i + 1 < n) {
            right[i] += right[i + 1] * std::exp(-(xs[i + 1] - xs[i]) / f.sigma);
        }
    }
    double left = 0.0;       // sum_{j <= k} alpha_j e^{-(x_last - x_j)/sigma}
    double left_at = xs.empty() ? 0.0 : xs[0];
    int k = -1;              // last training index with x_k <= query
    for (int t = 0; t < m; ++t) {
        if (t > 0 && q[t] < q[t - 1]) {
            throw ConfigError("predict_sorted_1d: queries must be ascending");
        }
        while (k + 1 < n && xs[k + 1] <= q[t]) {
            ++k;
            left = left * std::exp(-(xs[k] - left_at) / f.sigma) + al[k];
            left_at = xs[k];
        }
        double v = 0.0;
        if (k >= 0) v += left * std::exp(-(q[t] - left_at) / f.sigma);
        if (k + 1 < n) {
            v += right[k + 1] * std::exp(-(xs[k + 1] - q[t]) / f.sigma);
        }
        out[t] = v;
    }
    return out;
}

std::vector<double> predict_derivative_sorted_1d(
    const Fit& f, const std::vector<double>& q) {
    if (f.width != 1) {
        throw ConfigError("predict_derivative_sorted_1d: predictor is not 1-d");
    }
    std::vector<double> xs = f.points, al = f.alpha;
    if (f.route != FitRoute::kFast1d) {
        std::vector<int> idx(xs.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return f.points[a] < f.points[b]; });
        for (std::size_t i = 0; i < idx.size(); ++i) {
            xs[i] = f.points[idx[i]];
            al[i] = f.alpha[idx[i]];
        }
    }
    const int n = static_cast<int>(xs.size());
    const int m = static_cast<int>(q.size());
    std::vector<double> out(m);
    std::vector<double> right(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        right[i] = al[i];
        if (i + 1 < n) {
            right[i] += right[i + 1] * std::exp(-(xs[i + 1] - xs[i]) / f.sigma);
        }
    }
    double left = 0.0, left_at = xs.empty() ? 0.0 : xs[0];
    int k = -1;
    for (int t = 0; t < m; ++t) {
        if (t > 0 && q[t] < q[t - 1]) {
            throw ConfigError(
                "predict_derivative_sorted_1d: queries must be ascending");
        }
        while (k + 1 < n && xs[k + 1] <= q[t]) {
            ++k;
            left = left * std::exp(-(xs[k] - left_at) / f.sigma) + al[k];
            left_at = xs[k];
        }
        double v = 0.0;
        if (k >= 0) {
            v -= left * std::exp(-(q[t] - left_at) / f.sigma) / f.sigma;
        }
        if (k + 1 < n) {
            v += right[k + 1] * std::exp(-(xs[k + 1] - q[t]) / f.sigma) /
                 f.sigma;
        }
        out[t] = v;
    }
    return out;
}

std::vector<double> predict_many(const Fit& f, const SampleSet& test) {
    if (test.width != f.width) {
        throw ConfigError("predict_many: point width mismatch");
    }
    const int n = test.size();
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = predict(f, test.point(i));
    return out;
}

SegmentCoeffs analytic_segment(double x_left, double x_right, double xi,
                               double sigma) {
    if (!(sigma > 0.0)) {
        throw ConfigError("analytic_segment: sigma must be positive");
    }
    if (!(x_right > x_left)) {
        throw NumericError(
            "analytic_segment: degenerate segment (x_right <= x_left)");
    }
    if (x_left == 0.0 || x_right == 0.0) {
        throw NumericError(
            "analytic_segment: endpoint at the target's singular point");
    }
    const double u = (x_right - x_left) / sigma;
    const double eu = std::exp(u);
    const double emu = std::exp(-u);
    const double two_sinh = eu - emu;
    const double r = std::pow(std::abs(x_right / x_left), -xi);

    SegmentCoeffs c;
    if (x_left > 0.0) {
        // both endpoints positive: y(0) = 1, y(Delta) = r
        c.b = -(r - eu) / two_sinh;
        c.a = -emu * (r - eu) / two_sinh + (1.0 - r) / (1.0 - eu);
    } else if (x_right < 0.0) {
        // both endpoints negative: mirror of the positive case
        c.b = (r - eu) / two_sinh;
        c.a = emu * (r - eu) / two_sinh - (1.0 - r) / (1.0 - eu);
    } else {
        // straddling segment: y(0) = -1, y(Delta) = +r
        c.b = -(r + eu) / two_sinh;
        c.a = -emu * (r + eu) / two_sinh + (1.0 + r) / (eu - 1.0);
    }
    return c;
}

double sigma_f(const std::function<double(const double*)>& a,
               const std::function<double(const double*)>& b,
               const SampleSet& test) {
    double sum = 0.0;
    long count = 0;
    for (int i = 0; i < test.size(); ++i) {
        const double fa = a(test.point(i));
        const double fb = b(test.point(i));
        if (fa * fb < 0.0) {
            const double d = fa - fb;
            sum += d * d;
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double sigma_f(const Fit& a, const Fit& b, const SampleSet& test) {
    if (a.width == 1 && b.width == 1 && test.width == 1) {
        // sort once, evaluate both predictors with the O(N+P) sweep
        std::vector<double> q = test.x;
        std::sort(q.begin(), q.end());
        const std::vector<double> fa = predict_sorted_1d(a, q);
        const std::vector<double> fb = predict_sorted_1d(b, q);
        double sum = 0.0;
        long count = 0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (fa[i] * fb[i] < 0.0) {
                const double d = fa[i] - fb[i];
                sum += d * d;
                ++count;
            }
        }
        return count == 0 ? 0.0 : sum / static_cast<double>(count);
    }
    return sigma_f([&](const double* p) { return predict(a, p); },
                   [&](const double* p) { return predict(b, p); }, test);
}

}  // namespace krrlab
