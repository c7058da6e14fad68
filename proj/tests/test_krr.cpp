// krrlab: tests for the kernel ridge regression core.
// SPDX-License-Identifier: MIT

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "krrlab/defaults.hpp"
#include "krrlab/errors.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/model.hpp"
#include "krrlab/rng.hpp"
#include "krrlab/sampling.hpp"
#include "krrlab/test_grid.hpp"

using namespace krrlab;

namespace {

Model make_model(double chi, double xi, double sigma = defaults::kSigma, int dim = 1) {
    Model m;
    m.chi = chi;
    m.xi = xi;
    m.sigma = sigma;
    m.dim = dim;
    m.validate();
    return m;
}

SampleSet manual_set_1d(std::vector<double> xs, std::vector<double> ys) {
    SampleSet s;
    s.width = 1;
    s.x = std::move(xs);
    s.y = std::move(ys);
    return s;
}

}  // namespace

TEST_CASE("gram matrix: unit diagonal, symmetry, spot values") {
    Model m = make_model(1.0, 0.0, 100.0);
    Rng rng(7);
    SampleSet s = sample(m, 40, rng);
    GramMatrix K = gram(s, m.sigma);
    REQUIRE(K.n == 40);
    for (int i = 0; i < K.n; ++i) {
        CHECK(K.at(i, i) == doctest::Approx(1.0).epsilon(1e-15));
        for (int j = 0; j < i; ++j)
            CHECK(K.at(i, j) == doctest::Approx(K.at(j, i)).epsilon(1e-15));
    }
    // Two points at distance sigma give exactly exp(-1).
    Model m2 = make_model(0.0, 0.0, 2.5);
    SampleSet pair = manual_set_1d({0.0, 2.5}, {0.0, 1.0});
    GramMatrix K2 = gram(pair, m2.sigma);
    CHECK(K2.at(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    // sigma = 100, distance 3: exp(-0.03).
    SampleSet pair3 = manual_set_1d({-1.5, 1.5}, {-1.0, 1.0});
    GramMatrix K3 = gram(pair3, m.sigma);
    CHECK(K3.at(0, 1) == doctest::Approx(std::exp(-0.03)).epsilon(1e-15));
}

TEST_CASE("dense fit: one-point closed form and SPD failure reporting") {
    // K = [[1]], y = [1], ridge 1: alpha = 1 / (1 + 1) = 0.5.
    GramMatrix K;
    K.n = 1;
    K.a = {1.0};
    std::vector<double> alpha = fit(K, {1.0}, 1.0);
    CHECK(alpha[0] == doctest::Approx(0.5).epsilon(1e-15));

    // A matrix with a negative eigenvalue must be reported with the pivot.
    GramMatrix bad;
    bad.n = 2;
    bad.a = {1.0, 2.0, 2.0, 1.0};  // eigenvalues 3 and -1
    CHECK_THROWS_WITH_AS(fit(bad, {1.0, 1.0}, 1e-12),
                         doctest::Contains("pivot"), NumericError);
}

TEST_CASE("fit rejects negative ridge and applies the ridge floor") {
    Model m = make_model(1.0, 0.0);
    Rng rng(11);
    SampleSet s = sample(m, 50, rng);
    CHECK_THROWS_AS(fit_krr(m, s, -1e-3), ConfigError);
    // ridge 0 is lifted to the floor: the fit must still be solvable and
    // interpolate the data.
    Fit f = fit_krr(m, s, 0.0);
    CHECK(f.ridge == doctest::Approx(defaults::kRidgeFloor));
    double worst = 0.0;
    for (int i = 0; i < 50; ++i)
        worst = std::max(worst, std::fabs(predict(f, s.point(i)) - s.y[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("near-interpolation at the ridge floor, P = 500") {
    Model m = make_model(1.0, 0.25);
    Rng rng(3);
    SampleSet s = sample(m, 500, rng);
    Fit f = fit_krr(m, s, defaults::kRidgeFloor);
    REQUIRE(f.route == FitRoute::kFast1d);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i)
        worst = std::max(worst, std::fabs(predict(f, s.point(i)) - s.y[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("prediction is invariant under permutation of the training set") {
    Model m = make_model(2.0, 0.5);
    Rng rng(19);
    SampleSet s = sample(m, 200, rng);
    Fit f1 = fit_krr(m, s, 1e-4);

    // Reverse the sample order and refit.
    SampleSet rev = s;
    std::reverse(rev.x.begin(), rev.x.end());
    std::reverse(rev.y.begin(), rev.y.end());
    Fit f2 = fit_krr(m, rev, 1e-4);

    Rng qrng(5);
    for (int k = 0; k < 100; ++k) {
        const double q = qrng.uniform(-3.0, 3.0);
        CHECK(predict1(f1, q) == doctest::Approx(predict1(f2, q)).epsilon(1e-10));
    }
}

TEST_CASE("ridge shrinkage bound: |f| <= P max|y| / ridge") {
    Model m = make_model(1.0, 0.0);
    Rng rng(23);
    SampleSet s = sample(m, 100, rng);
    const double lam = 50.0;
    Fit f = fit_krr(m, s, lam);
    double ymax = 0.0;
    for (double v : s.y) ymax = std::max(ymax, std::fabs(v));
    const double bound = 100.0 * ymax / lam;
    for (int k = 0; k <= 200; ++k) {
        const double q = -3.0 + 6.0 * k / 200.0;
        CHECK(std::fabs(predict1(f, q)) <= bound);
    }
}

TEST_CASE("large sigma: interpolant is piecewise linear between samples") {
    // For sigma far above the data range the kernel is locally linear, so
    // the ridgeless interpolant approaches straight lines between samples.
    Model m = make_model(1.0, 0.0, 1000.0);
    Rng rng(31);
    SampleSet s = sample(m, 60, rng);
    Fit f = fit_krr(m, s, defaults::kRidgeFloor);

    std::vector<int> order(60);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return s.x[a] < s.x[b]; });
    // Probe interior midpoints away from the extreme samples.
    for (int r = 10; r < 49; ++r) {
        const int i = order[r], j = order[r + 1];
        if (s.x[j] - s.x[i] < 1e-3) continue;
        const double mid = 0.5 * (s.x[i] + s.x[j]);
        const double lin = 0.5 * (s.y[i] + s.y[j]);
        CHECK(predict1(f, mid) == doctest::Approx(lin).epsilon(0.01));
    }
}

TEST_CASE("fast tridiagonal route matches the dense route") {
    Model m = make_model(1.0, 0.25);
    Rng rng(43);
    SampleSet s = sample(m, 400, rng);
    for (double lam : {1e-12, 1e-6, 1.0}) {
        Fit fast = fit_krr(m, s, lam);
        FitOptions dense_opts;
        dense_opts.force_dense = true;
        Fit dense = fit_krr(m, s, lam, dense_opts);
        REQUIRE(fast.route == FitRoute::kFast1d);
        REQUIRE(dense.route == FitRoute::kDense);
        double scale = 0.0;
        for (double v : s.y) scale = std::max(scale, std::fabs(v));
        for (int k = 0; k <= 300; ++k) {
            const double q = -3.0 + 6.0 * k / 300.0;
            CHECK(std::fabs(predict1(fast, q) - predict1(dense, q))
                  <= 1e-8 * scale);
        }
    }
}

TEST_CASE("tridiagonal precision matrix inverts the kernel matrix") {
    Model m = make_model(0.0, 0.0, 1.7);
    Rng rng(51);
    std::vector<double> xs(30);
    for (double& v : xs) v = rng.uniform(-3.0, 3.0);
    std::sort(xs.begin(), xs.end());
    Tridiag T = laplace_precision_1d(xs, m.sigma);
    // Apply K to each column of T: the product must be the identity.
    for (int col = 0; col < 30; ++col) {
        std::vector<double> t(30, 0.0);
        t[col] = T.diag[col];
        if (col > 0) t[col - 1] = T.off[col - 1];
        if (col < 29) t[col + 1] = T.off[col];
        std::vector<double> kt = laplace_matvec_1d(xs, t, m.sigma);
        for (int rw = 0; rw < 30; ++rw)
            CHECK(kt[rw] == doctest::Approx(rw == col ? 1.0 : 0.0)
                                 .epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("matvec by prefix sums matches the direct quadratic form") {
    Rng rng(57);
    std::vector<double> xs(80);
    for (double& v : xs) v = rng.uniform(-3.0, 3.0);
    std::sort(xs.begin(), xs.end());
    std::vector<double> v(80);
    for (double& u : v) u = rng.normal();
    const double sigma = 0.9;
    std::vector<double> fast = laplace_matvec_1d(xs, v, sigma);
    for (int i = 0; i < 80; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 80; ++j)
            acc += std::exp(-std::fabs(xs[i] - xs[j]) / sigma) * v[j];
        CHECK(fast[i] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("sorted batch prediction matches pointwise prediction") {
    Model m = make_model(1.0, 0.0);
    Rng rng(61);
    SampleSet s = sample(m, 300, rng);
    Fit f = fit_krr(m, s, 1e-5);
    std::vector<double> qs(500);
    for (double& q : qs) q = rng.uniform(-3.2, 3.2);
    std::sort(qs.begin(), qs.end());
    std::vector<double> batch = predict_sorted_1d(f, qs);
    for (int i = 0; i < 500; ++i)
        CHECK(batch[i] == doctest::Approx(predict1(f, qs[i])).epsilon(1e-12));
    CHECK_THROWS_AS(predict_sorted_1d(f, std::vector<double>{1.0, 0.0}),
                    ConfigError);
}

TEST_CASE("batch derivative matches a central difference") {
    Model m = make_model(1.0, 0.25);
    Rng rng(67);
    SampleSet s = sample(m, 120, rng);
    Fit f = fit_krr(m, s, 1e-3);
    std::vector<double> qs;
    Rng qrng(2);
    for (int k = 0; k < 60; ++k) qs.push_back(qrng.uniform(-2.9, 2.9));
    std::sort(qs.begin(), qs.end());
    // Keep probes away from sample points, where f' jumps.
    std::vector<double> keep;
    for (double q : qs) {
        double gap = 1e9;
        for (double xv : s.x) gap = std::min(gap, std::fabs(q - xv));
        if (gap > 1e-4) keep.push_back(q);
    }
    std::vector<double> der = predict_derivative_sorted_1d(f, keep);
    const double h = 1e-7;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const double fd =
            (predict1(f, keep[i] + h) - predict1(f, keep[i] - h)) / (2 * h);
        CHECK(der[i] == doctest::Approx(fd).epsilon(1e-4).scale(0.01));
    }
}

TEST_CASE("analytic segment: endpoint conditions and 2x2 oracle") {
    Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        // Random segments of all three sign arrangements.
        double xl = rng.uniform(-2.0, 2.0);
        double xr = xl + rng.uniform(0.01, 1.5);
        if (xl == 0.0 || xr == 0.0) continue;
        const double xi = rng.uniform(0.0, 0.45);
        const double sigma = rng.uniform(0.5, 150.0);
        SegmentCoeffs c = analytic_segment(xl, xr, xi, sigma);

        const double u = (xr - xl) / sigma;
        auto yloc = [&](double t) {
            return c.a * std::exp(t / sigma) + c.b * std::exp(-t / sigma);
        };
        const double sl = xl > 0 ? 1.0 : -1.0;
        const double sr = xr > 0 ? 1.0 : -1.0;
        const double r = std::pow(std::fabs(xr / xl), -xi);
        // The coefficient arrangement amplifies roundoff by ~1/u for narrow
        // segments (u down to ~1e-4 here), so endpoint reconstruction is
        // good to ~1e-11, not machine epsilon.
        CHECK(yloc(0.0) == doctest::Approx(sl).epsilon(1e-10));
        CHECK(yloc(u * sigma) == doctest::Approx(sr * r).epsilon(1e-10));

        // Direct 2x2 solve for the same boundary data.
        const double eu = std::exp(u), emu = std::exp(-u);
        const double det = eu - emu;
        const double y0 = sl, y1 = sr * r;
        const double a_ref = (y1 - y0 * emu) / det;
        const double b_ref = (y0 * eu - y1) / det;
        CHECK(c.a == doctest::Approx(a_ref).epsilon(1e-10).scale(1.0));
        CHECK(c.b == doctest::Approx(b_ref).epsilon(1e-10).scale(1.0));
    }

    // xi = 0 on a one-signed segment: y is identically 1, so a + b = 1 and
    // a e^u + b e^-u = 1.
    SegmentCoeffs c0 = analytic_segment(0.5, 1.5, 0.0, 2.0);
    const double u0 = 1.0 / 2.0;
    CHECK(c0.a + c0.b == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c0.a * std::exp(u0) + c0.b * std::exp(-u0)
          == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(analytic_segment(1.0, 1.0, 0.0, 1.0), NumericError);
    CHECK_THROWS_AS(analytic_segment(0.0, 1.0, 0.2, 1.0), NumericError);
}

TEST_CASE("interpolating predictor follows the analytic segment form") {
    // At the ridge floor the fit interpolates, and between adjacent samples
    // the kernel predictor is exactly a two-exponential segment through the
    // sample values.  Compare against the analytic coefficients computed
    // from the target values at the segment ends.
    Model m = make_model(1.0, 0.3);
    Rng rng(83);
    SampleSet s = sample(m, 50, rng);
    Fit f = fit_krr(m, s, defaults::kRidgeFloor);

    std::vector<int> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return s.x[a] < s.x[b]; });

    int checked = 0;
    for (int r = 0; r + 1 < 50; ++r) {
        const double xl = s.x[order[r]], xr = s.x[order[r + 1]];
        if (xr - xl < 0.05) continue;  // skip slivers: nothing to probe
        SegmentCoeffs c = analytic_segment(xl, xr, m.xi, m.sigma);
        const double mid = 0.5 * (xl + xr);
        const double t = mid - xl;
        const double seg = c.a * std::exp(t / m.sigma)
                         + c.b * std::exp(-t / m.sigma);
        // Scale the comparison by the left endpoint magnitude: the segment
        // form is normalized to y(x_l) = sign(x_l).
        const double yl = s.y[order[r]];
        const double pred = predict1(f, mid) / std::fabs(yl);
        const double sign_l = xl > 0 ? 1.0 : -1.0;
        CHECK(pred * (sign_l * yl > 0 ? 1.0 : -1.0)
              == doctest::Approx(seg).epsilon(1e-8).scale(1.0));
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("sigma_f: disagreement functional") {
    // Identical predictors never disagree in sign.
    std::function<double(const double*)> f1 = [](const double*) { return 0.7; };
    std::function<double(const double*)> f2 = [](const double*) { return 0.7; };
    Model m = make_model(1.0, 0.0);
    Rng rng(91);
    SampleSet pts = sample(m, 2000, rng);
    CHECK(sigma_f(f1, f2, pts) == 0.0);
    // Constant predictors of opposite sign disagree everywhere: (2c)^2.
    std::function<double(const double*)> g1 = [](const double*) { return 0.3; };
    std::function<double(const double*)> g2 = [](const double*) { return -0.3; };
    CHECK(sigma_f(g1, g2, pts) == doctest::Approx(0.36).epsilon(1e-12));
}

TEST_CASE("sigma_f: fitted predictors on shared points") {
    Model m = make_model(1.0, 0.0);
    Rng ra(101), rb(102), rc(103);
    SampleSet sa = sample(m, 150, ra);
    SampleSet sb = sample(m, 150, rb);
    SampleSet probe = sample(m, 3000, rc);
    Fit fa = fit_krr(m, sa, 1e-6);
    Fit fb = fit_krr(m, sb, 1e-6);
    const double v1 = sigma_f(fa, fb, probe);
    // Must agree with the generic functional overload.
    std::function<double(const double*)> ga = [&](const double* x) { return predict(fa, x); };
    std::function<double(const double*)> gb = [&](const double* x) { return predict(fb, x); };
    const double v2 = sigma_f(ga, gb, probe);
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
    CHECK(v1 >= 0.0);
    // A predictor never sign-disagrees with itself.
    CHECK(sigma_f(fa, fa, probe) == 0.0);
}

TEST_CASE("fit guards: duplicates and outliers fall back to dense") {
    Model m = make_model(1.0, 0.0);
    Rng rng(111);
    SampleSet s = sample(m, 60, rng);
    // Exact duplicate abscissa: the tridiagonal chain would divide by ~0.
    SampleSet dup = s;
    dup.x[10] = dup.x[20];
    dup.y[10] = dup.y[20];
    Fit f = fit_krr(m, dup, 1e-6);
    CHECK(f.route == FitRoute::kDense);

    // Width > 1 data always goes dense.
    Model m2 = make_model(1.0, 0.0, 100.0, 3);
    Rng rng2(112);
    SampleSet s2 = sample(m2, 50, rng2);
    Fit f2 = fit_krr(m2, s2, 1e-6);
    CHECK(f2.route == FitRoute::kDense);
    // Dense d>=2 predictions reproduce training labels near the floor.
    Fit f2i = fit_krr(m2, s2, defaults::kRidgeFloor);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i)
        worst = std::max(worst, std::fabs(predict(f2i, s2.point(i)) - s2.y[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("empty and trivial inputs are rejected") {
    Model m = make_model(1.0, 0.0);
    SampleSet empty;
    empty.width = 1;
    CHECK_THROWS_AS(fit_krr(m, empty, 1e-6), ConfigError);
}

// ---------------------------------------------------------------------------
// Test grid
// ---------------------------------------------------------------------------

TEST_CASE("test grid: weights integrate the density") {
    for (double chi : {0.0, 1.0, 2.0}) {
        Model m = make_model(chi, 0.0);
        Rng rng(121);
        SampleSet s = sample(m, 400, rng);
        Fit f = fit_krr(m, s, 1e-6 * 400);
        TestGrid g = build_test_grid(f, m);
        const double mass = std::accumulate(g.w.begin(), g.w.end(), 0.0);
        // Frozen truncated-density masses on [-3, 3].
        const double ref = chi == 0.0   ? 0.9999779095030014145586
                           : chi == 1.0 ? 0.9998765901959133204505
                                        : 0.9995601503471611709970;
        CHECK(mass == doctest::Approx(ref).epsilon(1e-4));
        CHECK(g.bins >= 1);
        CHECK(!g.x.empty());
        CHECK(std::is_sorted(g.x.begin(), g.x.end()));
    }
}

TEST_CASE("test grid: decay scale matches a direct derivative bisection") {
    Model m = make_model(1.0, 0.25);
    Rng rng(131);
    SampleSet s = sample(m, 800, rng);
    Fit f = fit_krr(m, s, 1e-4 * 800);
    TestGrid g = build_test_grid(f, m);
    REQUIRE(!g.fallback);
    CHECK(g.x_tilde > 0.0);
    CHECK(g.x_tilde < m.x_max);
    // |f'| at the reported scale is close to a tenth of |f'(0)|, and the
    // threshold has not been crossed much earlier.
    auto dabs = [&](double q) {
        std::vector<double> one{q};
        return std::fabs(predict_derivative_sorted_1d(f, one)[0]);
    };
    const double d0 = dabs(0.0);
    CHECK(dabs(g.x_tilde) <= d0 / 10.0 * (1.0 + 1e-6));
    CHECK(dabs(g.x_tilde * 0.5) > d0 / 10.0);
}

TEST_CASE("test grid: per-bin budgets decay toward the floor") {
    Model m = make_model(1.0, 0.25);
    Rng rng(141);
    SampleSet s = sample(m, 800, rng);
    Fit f = fit_krr(m, s, 1e-4 * 800);
    TestGrid g = build_test_grid(f, m);
    REQUIRE(g.bins > 1);
    // Count points per positive-axis bin.
    std::vector<int> counts(g.bins, 0);
    for (double x : g.x) {
        if (x <= 0) continue;
        int j = std::min<int>(static_cast<int>(x / g.x_tilde), g.bins - 1);
        counts[j]++;
    }
    const double floor_budget =
        std::max(defaults::kTestGridBase / g.bins, defaults::kTestGridFloor);
    for (int j = 0; j + 1 < g.bins; ++j)
        CHECK(counts[j] >= counts[j + 1]);
    for (int j = 0; j < g.bins; ++j)
        CHECK(counts[j] >= static_cast<int>(0.9 * floor_budget));
    CHECK(counts[0] > counts[g.bins - 1]);
}

TEST_CASE("test grid: resolution scale multiplies the point count") {
    Model m = make_model(1.0, 0.0);
    Rng rng(151);
    SampleSet s = sample(m, 300, rng);
    Fit f = fit_krr(m, s, 0.05);
    TestGrid g1 = build_test_grid(f, m, 1.0);
    TestGrid g2 = build_test_grid(f, m, 2.0);
    CHECK(g2.x.size() > 1.8 * g1.x.size());
    CHECK(g2.x.size() < 2.2 * g1.x.size());
    CHECK_THROWS_AS(build_test_grid(f, m, 0.0), ConfigError);
}

TEST_CASE("test error: target as predictor scores zero") {
    Model m = make_model(1.0, 0.25);
    Rng rng(161);
    SampleSet s = sample(m, 400, rng);
    Fit f = fit_krr(m, s, 1e-3 * 400);
    TestGrid g = build_test_grid(f, m);
    auto oracle = [&](double x) { return target(m, x); };
    CHECK(test_error(oracle, m, g) == doctest::Approx(0.0).epsilon(1e-30));
    // And the fitted predictor scores something strictly positive but small.
    const double err = test_error(f, m, g);
    CHECK(err > 0.0);
    CHECK(err < 1.0);
}

TEST_CASE("test error: adaptive grid agrees with a brute-force quadrature") {
    Model m = make_model(1.0, 0.25);
    Rng rng(171);
    SampleSet s = sample(m, 500, rng);
    Fit f = fit_krr(m, s, 1e-2 * 500);
    TestGrid g = build_test_grid(f, m);
    const double fast = test_error(f, m, g);
    // Brute force: a very fine uniform midpoint rule over [-3, 3].
    const int n = 4000000;
    std::vector<double> qs(n);
    for (int i = 0; i < n; ++i)
        qs[i] = -3.0 + 6.0 * (i + 0.5) / n;
    std::vector<double> pred = predict_sorted_1d(f, qs);
    double slow = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = pred[i] - target(m, qs[i]);
        slow += (6.0 / n) * density(m, qs[i]) * d * d;
    }
    CHECK(fast == doctest::Approx(slow).epsilon(0.05));
}

TEST_CASE("mc test error: statistical floor and d >= 2 sanity") {
    Model m = make_model(1.0, 0.0, 100.0, 3);
    Rng rng(181);
    SampleSet s = sample(m, 300, rng);
    Fit f = fit_krr(m, s, 1e-6);
    Rng mc(182);
    CHECK_THROWS_AS(test_error_mc(f, m, 999, mc), ConfigError);
    const double e1 = test_error_mc(f, m, 20000, mc);
    CHECK(e1 >= 0.0);
    CHECK(e1 < 2.0);
    // Interpolation regime: training error is ~0 but fresh-point error is not.
    CHECK(e1 > 1e-8);
}
