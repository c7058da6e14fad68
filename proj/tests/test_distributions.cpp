// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "krrlab/errors.hpp"
#include "krrlab/model.hpp"
#include "krrlab/rng.hpp"
#include "krrlab/sampling.hpp"
#include "oracle_data.hpp"

using namespace krrlab;

namespace {

Model make_model(double chi, double xi = 0.0) {
    Model m;
    m.chi = chi;
    m.xi = xi;
    return m;
}

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const int n = static_cast<int>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double ks_statistic(std::vector<double> xs, const Model& m) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf_truncated(m, xs[i]);
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return ks;
}

double median_min_positive(const Model& m, int count, int seeds, int seed0) {
    std::vector<double> mins;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_stream(seed0, 0, 0, s));
        const SampleSet set = sample_1d(m, count, rng);
        double best = m.x_max;
        for (double v : set.x) {
            if (v > 0.0) best = std::min(best, v);
        }
        mins.push_back(best);
    }
    std::nth_element(mins.begin(), mins.begin() + mins.size() / 2, mins.end());
    return mins[mins.size() / 2];
}

}  // namespace

TEST_CASE("model validation rejects out-of-range parameters") {
    Model m = make_model(1.0);
    CHECK_NOTHROW(m.validate());
    m.chi = -0.5;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("chi"), ConfigError);
    m = make_model(1.0, 1.0);  // xi must be < (chi+1)/2 = 1
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("xi"), ConfigError);
    m = make_model(1.0);
    m.sigma = 0.0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("sigma"), ConfigError);
    m = make_model(1.0);
    m.dim = 0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("dim"), ConfigError);
    m = make_model(1.0);
    m.x_max = -3.0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("x_max"), ConfigError);
}

TEST_CASE("density: values, symmetry, normalization mass") {
    const Model m0 = make_model(0.0);
    CHECK(density(m0, 0.0) == doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-14));
    const Model m2 = make_model(2.0);
    CHECK(density(m2, 0.0) == 0.0);

    for (double chi : {0.0, 1.0, 2.0, 4.0}) {
        const Model m = make_model(chi);
        for (double x : {0.3, 1.1, 2.7}) {
            CHECK(density(m, x) == doctest::Approx(density(m, -x)).epsilon(1e-14));
        }
        // trapezoid mass over [-3,3] against the frozen oracle
        const int n = 200000;
        double mass = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = -3.0 + 6.0 * i / n;
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            mass += w * density(m, x);
        }
        mass *= 6.0 / n;
        for (const auto& ref : krrlab_test::kDensityMass) {
            if (ref.chi == chi) {
                CHECK(mass == doctest::Approx(ref.val).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("target: sign convention, magnitude, singular point") {
    const Model flat = make_model(1.0, 0.0);
    CHECK(target(flat, 2.0) == 1.0);
    CHECK(target(flat, -0.7) == -1.0);
    CHECK(target(flat, 0.0) == 0.0);  // sign(0) = 0 convention

    const Model sing = make_model(2.0, 0.5);
    CHECK(target(sing, 0.25) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(target(sing, -0.25) == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(target(sing, 0.0), doctest::Contains("singular"),
                         NumericError);
}

TEST_CASE("cdf oracle: endpoints and symmetry") {
    const Model m = make_model(1.0);
    CHECK(cdf_truncated(m, -3.0) == 0.0);
    CHECK(cdf_truncated(m, 3.0) == 1.0);
    CHECK(cdf_truncated(m, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(cdf_truncated(make_model(3.0), 0.5), ConfigError);
}

TEST_CASE("sample_1d: deterministic for a fixed seed") {
    const Model m = make_model(1.0);
    Rng a(123), b(123);
    const SampleSet sa = sample_1d(m, 500, a);
    const SampleSet sb = sample_1d(m, 500, b);
    CHECK(sa.x == sb.x);
    CHECK(sa.y == sb.y);
}

TEST_CASE("sample_1d: empirical law matches the exact CDF (KS < 0.02 at P=1e4)") {
    for (double chi : {0.0, 1.0, 2.0}) {
        const Model m = make_model(chi);
        Rng rng(derive_stream(42, 0, 0, static_cast<int>(chi)));
        const SampleSet s = sample_1d(m, 10000, rng);
        CAPTURE(chi);
        CHECK(ks_statistic(s.x, m) < 0.02);
    }
}

TEST_CASE("sample_1d: sign balance for chi=0 within 4*sqrt(P)") {
    const Model m = make_model(0.0);
    Rng rng(99);
    const SampleSet s = sample_1d(m, 10000, rng);
    long pos = 0, neg = 0;
    for (double v : s.x) (v > 0.0 ? pos : neg)++;
    CHECK(std::abs(pos - neg) < 4.0 * std::sqrt(10000.0));
}

TEST_CASE("sample_1d: smallest positive sample scales like P^{-1/(chi+1)}") {
    for (double chi : {1.0, 3.0}) {
        const std::vector<double> ps = {100, 1000, 10000};
        std::vector<double> med;
        const Model m = make_model(chi);
        for (double p : ps) {
            med.push_back(median_min_positive(m, static_cast<int>(p), 200, 7));
        }
        const double slope = loglog_slope(ps, med);
        CAPTURE(chi);
        CHECK(std::abs(slope - (-1.0 / (chi + 1.0))) < 0.1);
        // factor-of-10 growth in P shrinks the scale by 10^{1/(chi+1)}
        const double expect = std::pow(10.0, 1.0 / (chi + 1.0));
        CHECK(med[0] / med[1] == doctest::Approx(expect).epsilon(0.25));
        CHECK(med[1] / med[2] == doctest::Approx(expect).epsilon(0.25));
    }
}

TEST_CASE("sample_1d: xi > 0 never yields zero points or non-finite labels") {
    const Model m = make_model(1.0, 0.45);
    Rng rng(4);
    const SampleSet s = sample_1d(m, 100000, rng);
    for (int i = 0; i < s.size(); ++i) {
        REQUIRE(std::abs(s.x[i]) >= 1e-300);
        REQUIRE(std::isfinite(s.y[i]));
    }
}

TEST_CASE("sample_1d: rejects a non-positive sample size") {
    const Model m = make_model(1.0);
    Rng rng(1);
    CHECK_THROWS_AS(sample_1d(m, 0, rng), ConfigError);
}

TEST_CASE("sample_cylinder: sphere coordinates are unit norm within 1e-12") {
    Model m = make_model(1.0);
    m.dim = 3;
    Rng rng(11);
    const SampleSet s = sample_cylinder(m, 2000, rng);
    REQUIRE(s.width == 4);
    for (int i = 0; i < s.size(); ++i) {
        const double* row = s.point(i);
        double norm2 = 0.0;
        for (int k = 1; k < s.width; ++k) norm2 += row[k] * row[k];
        REQUIRE(std::abs(std::sqrt(norm2) - 1.0) < 1e-12);
    }
}

TEST_CASE("sample_cylinder: sphere coordinate mean is O(1/sqrt(P))") {
    Model m = make_model(1.0);
    m.dim = 2;
    Rng rng(13);
    const int count = 10000;
    const SampleSet s = sample_cylinder(m, count, rng);
    double mean = 0.0;
    for (int i = 0; i < s.size(); ++i) mean += s.point(i)[1];
    mean /= count;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("sample_cylinder: first coordinate follows the 1-d law") {
    Model m = make_model(1.0);
    m.dim = 2;
    Rng rng(17);
    const SampleSet s = sample_cylinder(m, 10000, rng);
    std::vector<double> first(s.size());
    for (int i = 0; i < s.size(); ++i) first[i] = s.point(i)[0];
    Model line = m;
    line.dim = 1;
    CHECK(ks_statistic(first, line) < 0.02);
    // labels come from the first coordinate
    for (int i = 0; i < 50; ++i) {
        CHECK(s.y[i] == target(line, first[i]));
    }
}

TEST_CASE("sample_cylinder: rejects dim < 2") {
    Model m = make_model(1.0);
    m.dim = 1;
    Rng rng(1);
    CHECK_THROWS_WITH_AS(sample_cylinder(m, 10, rng), doctest::Contains("dim"),
                         ConfigError);
}

TEST_CASE("density envelope dominates the density") {
    for (double chi : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const Model m = make_model(chi);
        const double envelope = density_envelope(m);
        Rng rng(23);
        for (int i = 0; i < 20000; ++i) {
            const double x = rng.uniform(-m.x_max, m.x_max);
            REQUIRE(density(m, x) <= envelope);
        }
    }
}
