// krrlab: numerical laboratory for kernel ridge regression on singular
// data densities.
// SPDX-License-Identifier: MIT
#include "krrlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "krrlab/errors.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/rng.hpp"
#include "krrlab/test_grid.hpp"
#include "krrlab/theory.hpp"

namespace krrlab {

namespace {

// Replicate coordinates fan out into per-purpose sub-streams (see the
// header); reserving two bits keeps the fan-out collision-free.
constexpr std::uint64_t kSeedLimit = std::uint64_t{1} << 62;

std::uint64_t train_stream(const ExperimentConfig& c, int p_idx, int l_idx,
                           std::uint64_t s) {
    return derive_stream(c.seed, static_cast<std::uint64_t>(p_idx),
                         static_cast<std::uint64_t>(l_idx), 4 * s);
}
std::uint64_t test_stream(const ExperimentConfig& c, int p_idx, int l_idx,
                          std::uint64_t s) {
    return derive_stream(c.seed, static_cast<std::uint64_t>(p_idx),
                         static_cast<std::uint64_t>(l_idx), 4 * s + 1);
}
std::uint64_t pair_test_stream(const ExperimentConfig& c, int p_idx, int l_idx,
                               std::uint64_t s) {
    return derive_stream(c.seed, static_cast<std::uint64_t>(p_idx),
                         static_cast<std::uint64_t>(l_idx), 4 * s + 2);
}

// Run tasks 0..n_tasks-1 on `workers` threads (0 = hardware concurrency).
// Tasks are claimed from an atomic counter; each writes only into its own
// result slot, so the outcome is independent of scheduling. The first
// exception aborts the run and is rethrown after all workers join.
void run_tasks(int workers, int n_tasks, const std::function<void(int)>& task) {
    if (n_tasks <= 0) return;
    int n_threads = workers > 0
                        ? workers
                        : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    n_threads = std::min(n_threads, n_tasks);

    if (n_threads == 1) {
        for (int i = 0; i < n_tasks; ++i) task(i);
        return;
    }

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_tasks) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

// Measured generalization error of a fitted predictor: deterministic
// quadrature against the known target in one dimension, fresh Monte Carlo
// above.
double measure_test_error(const ExperimentConfig& c, const Fit& f,
                          std::uint64_t mc_stream) {
    if (c.model.dim == 1) {
        const TestGrid grid = build_test_grid(f, c.model, c.resolution_scale);
        return test_error(f, c.model, grid);
    }
    const int n = std::max(
        defaults::kMcTestPointsMin,
        static_cast<int>(std::lround(defaults::kMcTestPoints *
                                     c.resolution_scale)));
    Rng rng(mc_stream);
    return test_error_mc(f, c.model, n, rng);
}

int sigma_f_sample_count(const ExperimentConfig& c) {
    return std::max(100, static_cast<int>(std::lround(
                             defaults::kSigmaFTestPoints * c.resolution_scale)));
}

void validate_common(const ExperimentConfig& c) {
    c.model.validate();
    if (c.p_values.empty()) {
        throw ConfigError("experiment config: no sample sizes given");
    }
    if (c.p_cap < 1) throw ConfigError("experiment config: p_cap must be >= 1");
    for (int p : c.p_values) {
        if (p < 1) {
            throw ConfigError("experiment config: sample size " +
                              std::to_string(p) + " is not positive");
        }
        if (p > c.p_cap) {
            throw ConfigError("experiment config: sample size " +
                              std::to_string(p) + " exceeds the cap " +
                              std::to_string(c.p_cap));
        }
    }
    if (c.seeds.empty()) {
        throw ConfigError("experiment config: no replicate seeds given");
    }
    std::set<std::uint64_t> distinct(c.seeds.begin(), c.seeds.end());
    if (distinct.size() != c.seeds.size()) {
        throw ConfigError("experiment config: replicate seeds must be distinct");
    }
    for (std::uint64_t s : c.seeds) {
        if (s >= kSeedLimit) {
            throw ConfigError(
                "experiment config: replicate seeds must be below 2^62 "
                "(two bits are reserved for sub-stream derivation)");
        }
    }
    for (double l : c.lambda_over_p) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw ConfigError(
                "experiment config: lambda/P values must be finite and >= 0");
        }
    }
    if (!(c.resolution_scale > 0.0) || !std::isfinite(c.resolution_scale)) {
        throw ConfigError(
            "experiment config: resolution scale must be positive");
    }
    if (c.workers < 0) {
        throw ConfigError("experiment config: worker count must be >= 0");
    }
}

// Shortest decimal representation that round-trips to the same double.
std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string opt_num(const std::optional<double>& v) {
    return v ? num(*v) : std::string();
}

double parse_double(const std::string& field, int line_no) {
    double v = 0.0;
    const char* begin = field.c_str();
    const char* end = begin + field.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    const auto r = std::from_chars(begin, end, v);
    if (r.ec != std::errc{} || r.ptr != end) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": cannot parse number from '" + field + "'");
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

SampleSet subset(const SampleSet& data, const std::vector<int>& order,
                 int from, int count) {
    SampleSet out;
    out.width = data.width;
    out.x.reserve(static_cast<std::size_t>(count) * data.width);
    out.y.reserve(static_cast<std::size_t>(count));
    for (int i = from; i < from + count; ++i) {
        const double* p = data.point(order[static_cast<std::size_t>(i)]);
        out.x.insert(out.x.end(), p, p + data.width);
        out.y.push_back(data.y[static_cast<std::size_t>(order[i])]);
    }
    return out;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() %
                                       static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(j)]);
    }
    return idx;
}

// Dense predictor on an arbitrary labelled sample (no data model involved;
// used by the external-dataset path).
Fit dense_fit(const SampleSet& train, double sigma, double ridge) {
    const GramMatrix K = gram(train, sigma);
    Fit f;
    f.route = FitRoute::kDense;
    f.width = train.width;
    f.sigma = sigma;
    f.ridge = std::max(ridge, defaults::kRidgeFloor);
    f.points = train.x;
    f.alpha = fit(K, train.y, ridge);
    return f;
}

double mean_squared_prediction_error(const Fit& f, const SampleSet& test) {
    const std::vector<double> pred = predict_many(f, test);
    double sum = 0.0;
    for (int i = 0; i < test.size(); ++i) {
        const double d = pred[static_cast<std::size_t>(i)] -
                         test.y[static_cast<std::size_t>(i)];
        sum += d * d;
    }
    return sum / static_cast<double>(test.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config helpers
// ---------------------------------------------------------------------------

std::vector<std::uint64_t> default_seeds(int n) {
    if (n < 1) throw ConfigError("default_seeds: need at least one replicate");
    std::vector<std::uint64_t> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = i;
    return s;
}

int scaled_count(int base, int divisor) {
    if (divisor < 1) throw ConfigError("scaled_count: divisor must be >= 1");
    return std::max(2, base / divisor);
}

std::vector<double> default_lambda_grid(const Model& model, int p) {
    model.validate();
    if (p < 1) throw ConfigError("default_lambda_grid: P must be >= 1");
    // Crossover ridge lambda* ~ P^{-1/(dim+chi)}; grid in lambda/P units.
    const double crossover =
        std::pow(static_cast<double>(p),
                 -1.0 / (static_cast<double>(model.dim) + model.chi)) /
        static_cast<double>(p);
    const int n = defaults::kLambdaGridPoints;
    const double half = defaults::kLambdaGridDecades / 2.0;
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double decade =
            -half + defaults::kLambdaGridDecades * i / (n - 1);
        grid[static_cast<std::size_t>(i)] =
            crossover * std::pow(10.0, decade);
    }
    return grid;
}

void validate(const ExperimentConfig& config) { validate_common(config); }

// ---------------------------------------------------------------------------
// Learning curve
// ---------------------------------------------------------------------------

std::vector<ExperimentRow> learning_curve(const ExperimentConfig& config) {
    validate_common(config);
    const int n_p = static_cast<int>(config.p_values.size());
    const int n_s = static_cast<int>(config.seeds.size());
    std::vector<ExperimentRow> rows(static_cast<std::size_t>(n_p) * n_s);

    run_tasks(config.workers, n_p * n_s, [&](int task) {
        const auto t0 = std::chrono::steady_clock::now();
        const int p_idx = task / n_s;
        const int s_idx = task % n_s;
        const int p = config.p_values[static_cast<std::size_t>(p_idx)];
        const std::uint64_t s = config.seeds[static_cast<std::size_t>(s_idx)];

        Rng rng(train_stream(config, p_idx, 0, s));
        const SampleSet train = sample(config.model, p, rng);
        const Fit f = fit_krr(config.model, train, 0.0);

        ExperimentRow row;
        row.p = p;
        row.lambda_over_p = 0.0;
        row.lambda = 0.0;
        row.seed = s;
        row.test_error =
            measure_test_error(config, f, test_stream(config, p_idx, 0, s));
        row.wall_ms = elapsed_ms(t0);
        rows[static_cast<std::size_t>(task)] = row;
    });
    return rows;
}

std::vector<LearningCurvePoint> aggregate_learning_curve(
    const std::vector<ExperimentRow>& rows) {
    std::vector<LearningCurvePoint> points;
    for (const ExperimentRow& row : rows) {
        if (!row.test_error) continue;
        auto it = std::find_if(points.begin(), points.end(),
                               [&](const LearningCurvePoint& q) {
                                   return q.p == row.p;
                               });
        if (it == points.end()) {
            points.push_back({row.p, 0.0, 0.0, 0});
            it = std::prev(points.end());
        }
        it->mean += *row.test_error;
        it->count += 1;
    }
    if (points.empty()) {
        throw ConfigError("aggregate_learning_curve: no measured rows");
    }
    for (LearningCurvePoint& q : points) q.mean /= q.count;
    for (const ExperimentRow& row : rows) {
        if (!row.test_error) continue;
        for (LearningCurvePoint& q : points) {
            if (q.p == row.p) {
                const double d = *row.test_error - q.mean;
                q.stderr_mean += d * d;
            }
        }
    }
    for (LearningCurvePoint& q : points) {
        q.stderr_mean = q.count > 1 ? std::sqrt(q.stderr_mean /
                                                (q.count - 1.0) / q.count)
                                    : 0.0;
    }
    std::sort(points.begin(), points.end(),
              [](const LearningCurvePoint& a, const LearningCurvePoint& b) {
                  return a.p < b.p;
              });
    return points;
}

// ---------------------------------------------------------------------------
// Ridge sweep
// ---------------------------------------------------------------------------

std::vector<ExperimentRow> ridge_sweep(const ExperimentConfig& config,
                                       const Spectrum* spectrum) {
    validate_common(config);
    if (config.lambda_over_p.empty()) {
        throw ConfigError("ridge_sweep: no lambda/P values given");
    }
    if (config.want_replica && spectrum == nullptr) {
        throw ConfigError(
            "ridge_sweep: the replica estimator needs an assembled spectrum");
    }

    const int n_p = static_cast<int>(config.p_values.size());
    const int n_l = static_cast<int>(config.lambda_over_p.size());
    const int n_s = static_cast<int>(config.seeds.size());

    // The replica prediction depends only on the grid cell, not on the
    // replicate; solve the fixed points up front (cheap and serial).
    std::vector<double> replica_cell;
    if (config.want_replica) {
        const ModeSpectrum modes = to_mode_spectrum(*spectrum);
        replica_cell.resize(static_cast<std::size_t>(n_p) * n_l);
        for (int pi = 0; pi < n_p; ++pi) {
            for (int li = 0; li < n_l; ++li) {
                const int p = config.p_values[static_cast<std::size_t>(pi)];
                const double lambda =
                    config.lambda_over_p[static_cast<std::size_t>(li)] * p;
                replica_cell[static_cast<std::size_t>(pi) * n_l + li] =
                    replica_error(modes, p, lambda);
            }
        }
    }

    const bool need_fit = config.want_test_error || config.want_kare;
    std::vector<ExperimentRow> rows(static_cast<std::size_t>(n_p) * n_l * n_s);

    run_tasks(config.workers, n_p * n_l * n_s, [&](int task) {
        const auto t0 = std::chrono::steady_clock::now();
        const int pi = task / (n_l * n_s);
        const int li = (task / n_s) % n_l;
        const int si = task % n_s;
        const int p = config.p_values[static_cast<std::size_t>(pi)];
        const double lop = config.lambda_over_p[static_cast<std::size_t>(li)];
        const double lambda = lop * p;
        const std::uint64_t s = config.seeds[static_cast<std::size_t>(si)];

        ExperimentRow row;
        row.p = p;
        row.lambda_over_p = lop;
        row.lambda = lambda;
        row.seed = s;
        if (config.want_replica) {
            row.replica = replica_cell[static_cast<std::size_t>(pi) * n_l + li];
        }

        if (need_fit) {
            Rng rng(train_stream(config, pi, li, s));
            const SampleSet train = sample(config.model, p, rng);
            if (config.want_kare) {
                const GramMatrix K = gram(train, config.model.sigma);
                row.kare = kare(K, train.y,
                                std::max(lambda, defaults::kRidgeFloor));
            }
            if (config.want_test_error) {
                const Fit f = fit_krr(config.model, train, lambda);
                row.test_error =
                    measure_test_error(config, f, test_stream(config, pi, li, s));
            }
        }

        // Replicates pair up for the predictor-discrepancy diagnostic; the
        // pair's work lives entirely in the first replicate's task so tasks
        // stay independent.
        if (config.want_sigma_f && si % 2 == 0 &&
            si + 1 < static_cast<int>(config.seeds.size())) {
            const std::uint64_t s2 =
                config.seeds[static_cast<std::size_t>(si) + 1];
            Rng rng_a(train_stream(config, pi, li, s));
            Rng rng_b(train_stream(config, pi, li, s2));
            const SampleSet train_a = sample(config.model, p, rng_a);
            const SampleSet train_b = sample(config.model, p, rng_b);
            const Fit fa = fit_krr(config.model, train_a, lambda);
            const Fit fb = fit_krr(config.model, train_b, lambda);
            Rng rng_t(pair_test_stream(config, pi, li, s));
            const SampleSet shared =
                sample(config.model, sigma_f_sample_count(config), rng_t);
            row.sigma_f = sigma_f(fa, fb, shared);
        }

        row.wall_ms = elapsed_ms(t0);
        rows[static_cast<std::size_t>(task)] = row;
    });
    return rows;
}

std::vector<ExperimentRow> sigma_f_study(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.want_test_error = false;
    c.want_replica = false;
    c.want_kare = false;
    c.want_sigma_f = true;
    std::vector<ExperimentRow> rows = ridge_sweep(c, nullptr);
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [](const ExperimentRow& r) {
                                  return !r.sigma_f.has_value();
                              }),
               rows.end());
    return rows;
}

// ---------------------------------------------------------------------------
// Power-law fit and collapse scoring
// ---------------------------------------------------------------------------

PowerLawFit fit_power_law(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw ConfigError("fit_power_law: x and y sizes differ");
    }
    const int n = static_cast<int>(xs.size());
    if (n < 3) {
        throw ConfigError("fit_power_law: need at least three points");
    }
    for (int i = 0; i < n; ++i) {
        if (!(xs[static_cast<std::size_t>(i)] > 0.0) ||
            !(ys[static_cast<std::size_t>(i)] > 0.0) ||
            !std::isfinite(xs[static_cast<std::size_t>(i)]) ||
            !std::isfinite(ys[static_cast<std::size_t>(i)])) {
            throw ConfigError(
                "fit_power_law: data must be strictly positive and finite "
                "(point " +
                std::to_string(i) + ")");
        }
    }
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += std::log(xs[static_cast<std::size_t>(i)]);
        sy += std::log(ys[static_cast<std::size_t>(i)]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = std::log(xs[static_cast<std::size_t>(i)]) - mx;
        const double dy = std::log(ys[static_cast<std::size_t>(i)]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0)) {
        throw ConfigError("fit_power_law: x values are all equal");
    }
    PowerLawFit out;
    out.exponent = sxy / sxx;
    out.amplitude = std::exp(my - out.exponent * mx);
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = std::log(ys[static_cast<std::size_t>(i)]) -
                         (my + out.exponent *
                                   (std::log(xs[static_cast<std::size_t>(i)]) -
                                    mx));
        ss_res += r * r;
    }
    out.exponent_stderr = std::sqrt(ss_res / (n - 2) / sxx);
    return out;
}

namespace {

struct LogCurve {
    std::vector<double> lu;  // ascending log rescaled ridge
    std::vector<double> le;  // log error
};

double interp(const LogCurve& c, double lu) {
    // lu is inside [c.lu.front(), c.lu.back()] by construction.
    const auto it = std::lower_bound(c.lu.begin(), c.lu.end(), lu);
    if (it == c.lu.begin()) return c.le.front();
    if (it == c.lu.end()) return c.le.back();
    const std::size_t hi = static_cast<std::size_t>(it - c.lu.begin());
    const std::size_t lo = hi - 1;
    const double w = (lu - c.lu[lo]) / (c.lu[hi] - c.lu[lo]);
    return c.le[lo] + w * (c.le[hi] - c.le[lo]);
}

}  // namespace

double collapse_score(const std::vector<CollapseCurve>& curves,
                      double rescale_exponent) {
    if (curves.size() < 2) {
        throw ConfigError("collapse_score: need at least two curves");
    }
    std::vector<LogCurve> logs;
    logs.reserve(curves.size());
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const CollapseCurve& c : curves) {
        if (c.lambda.size() != c.error.size() || c.lambda.size() < 2) {
            throw ConfigError(
                "collapse_score: each curve needs matching lambda/error "
                "lists with at least two points");
        }
        if (!(c.p > 0.0)) {
            throw ConfigError("collapse_score: curve sample sizes must be "
                              "positive");
        }
        std::vector<std::pair<double, double>> pts;
        pts.reserve(c.lambda.size());
        for (std::size_t i = 0; i < c.lambda.size(); ++i) {
            if (!(c.lambda[i] > 0.0) || !(c.error[i] > 0.0) ||
                !std::isfinite(c.lambda[i]) || !std::isfinite(c.error[i])) {
                throw ConfigError(
                    "collapse_score: ridges and errors must be strictly "
                    "positive and finite");
            }
            pts.emplace_back(
                std::log(c.lambda[i]) - rescale_exponent * std::log(c.p),
                std::log(c.error[i]));
        }
        std::sort(pts.begin(), pts.end());
        LogCurve lc;
        for (const auto& [u, e] : pts) {
            lc.lu.push_back(u);
            lc.le.push_back(e);
        }
        lo = std::max(lo, lc.lu.front());
        hi = std::min(hi, lc.lu.back());
        logs.push_back(std::move(lc));
    }
    if (!(lo < hi)) {
        throw NumericError(
            "collapse_score: the rescaled curves share no common ridge "
            "support at exponent " +
            std::to_string(rescale_exponent));
    }

    const int n = defaults::kCollapseGridPoints;
    double score = 0.0;
    int terms = 0;
    for (int g = 0; g < n; ++g) {
        const double lu = lo + (hi - lo) * g / (n - 1);
        for (std::size_t a = 0; a < logs.size(); ++a) {
            const double ea = interp(logs[a], lu);
            for (std::size_t b = a + 1; b < logs.size(); ++b) {
                const double d = ea - interp(logs[b], lu);
                score += d * d;
                ++terms;
            }
        }
    }
    return score / terms;
}

double best_collapse_exponent(const std::vector<CollapseCurve>& curves,
                              double lo, double hi, int n_grid) {
    if (!(lo < hi) || n_grid < 1) {
        throw ConfigError(
            "best_collapse_exponent: need lo < hi and at least one grid "
            "step");
    }
    double best_e = 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int i = 0; i <= n_grid; ++i) {
        const double e = lo + (hi - lo) * i / n_grid;
        double s;
        try {
            s = collapse_score(curves, e);
        } catch (const NumericError&) {
            continue;  // no overlap at this trial exponent
        }
        if (s < best_score) {
            best_score = s;
            best_e = e;
            any = true;
        }
    }
    if (!any) {
        throw NumericError(
            "best_collapse_exponent: no trial exponent leaves the curves "
            "with common support");
    }
    return best_e;
}

// ---------------------------------------------------------------------------
// External datasets
// ---------------------------------------------------------------------------

SampleSet load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_dataset_csv: cannot open '" + path + "'");
    SampleSet data;
    data.width = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line) || line[0] == '#') continue;
        if (data.size() >= defaults::kDatasetRowCap) break;  // desk-scale cap
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() < 2) {
            throw ConfigError("load_dataset_csv: line " +
                              std::to_string(line_no) +
                              " has no feature columns");
        }
        const int width = static_cast<int>(fields.size()) - 1;
        if (data.width == 0) {
            data.width = width;
        } else if (width != data.width) {
            throw ConfigError(
                "load_dataset_csv: ragged row at line " +
                std::to_string(line_no) + " (" + std::to_string(width) +
                " features, expected " + std::to_string(data.width) + ")");
        }
        const double label = parse_double(fields[0], line_no);
        if (label != 1.0 && label != -1.0) {
            throw ConfigError("load_dataset_csv: label at line " +
                              std::to_string(line_no) +
                              " is not +1 or -1 (got " + fields[0] + ")");
        }
        data.y.push_back(label);
        for (int j = 1; j <= width; ++j) {
            data.x.push_back(
                parse_double(fields[static_cast<std::size_t>(j)], line_no));
        }
    }
    if (data.size() == 0) {
        throw ConfigError("load_dataset_csv: no data rows in '" + path + "'");
    }
    return data;
}

DatasetSplit split_dataset(const SampleSet& data, double test_fraction,
                           Rng& rng) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
        throw ConfigError("split_dataset: test fraction must lie in (0, 1)");
    }
    const int n = data.size();
    if (n < 2) {
        throw ConfigError("split_dataset: need at least two samples");
    }
    int n_test =
        static_cast<int>(std::lround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp(n_test, 1, n - 1);
    const std::vector<int> order = shuffled_indices(n, rng);
    DatasetSplit out;
    out.train = subset(data, order, 0, n - n_test);
    out.test = subset(data, order, n - n_test, n_test);
    return out;
}

std::vector<ExperimentRow> dataset_sweep(const ExperimentConfig& config,
                                         const SampleSet& data) {
    validate_common(config);
    if (config.lambda_over_p.empty()) {
        throw ConfigError("dataset_sweep: no lambda/P values given");
    }
    if (config.want_replica) {
        throw ConfigError(
            "dataset_sweep: the replica estimator needs a model spectrum, "
            "which external data does not have");
    }
    const int n = data.size();
    if (n < 2) throw ConfigError("dataset_sweep: need at least two samples");
    const int n_test = std::clamp(
        static_cast<int>(std::lround(defaults::kHoldoutFraction *
                                     static_cast<double>(n))),
        1, n - 1);
    const int pool = n - n_test;
    for (int p : config.p_values) {
        const int need = config.want_sigma_f ? 2 * p : p;
        if (need > pool) {
            throw ConfigError(
                "dataset_sweep: sample size " + std::to_string(p) +
                (config.want_sigma_f ? " (doubled for predictor pairs)"
                                     : "") +
                " exceeds the " + std::to_string(pool) +
                " samples left after the held-out split");
        }
    }

    const int n_p = static_cast<int>(config.p_values.size());
    const int n_l = static_cast<int>(config.lambda_over_p.size());
    const int n_s = static_cast<int>(config.seeds.size());
    const double sigma = config.model.sigma;
    std::vector<ExperimentRow> rows(static_cast<std::size_t>(n_p) * n_l * n_s);

    run_tasks(config.workers, n_p * n_l * n_s, [&](int task) {
        const auto t0 = std::chrono::steady_clock::now();
        const int pi = task / (n_l * n_s);
        const int li = (task / n_s) % n_l;
        const int si = task % n_s;
        const int p = config.p_values[static_cast<std::size_t>(pi)];
        const double lop = config.lambda_over_p[static_cast<std::size_t>(li)];
        const double lambda = lop * p;
        const std::uint64_t s = config.seeds[static_cast<std::size_t>(si)];

        ExperimentRow row;
        row.p = p;
        row.lambda_over_p = lop;
        row.lambda = lambda;
        row.seed = s;

        Rng rng(train_stream(config, pi, li, s));
        const std::vector<int> order = shuffled_indices(n, rng);
        const SampleSet test = subset(data, order, pool, n_test);

        if (config.want_test_error || config.want_kare) {
            const SampleSet train = subset(data, order, 0, p);
            if (config.want_kare) {
                const GramMatrix K = gram(train, sigma);
                row.kare = kare(K, train.y,
                                std::max(lambda, defaults::kRidgeFloor));
            }
            if (config.want_test_error) {
                const Fit f = dense_fit(train, sigma, lambda);
                row.test_error = mean_squared_prediction_error(f, test);
            }
        }

        if (config.want_sigma_f && si % 2 == 0 &&
            si + 1 < static_cast<int>(config.seeds.size())) {
            // Disjoint halves of this task's shuffle; its held-out part is
            // the shared comparison sample.
            const SampleSet train_a = subset(data, order, 0, p);
            const SampleSet train_b = subset(data, order, p, p);
            const Fit fa = dense_fit(train_a, sigma, lambda);
            const Fit fb = dense_fit(train_b, sigma, lambda);
            row.sigma_f = sigma_f(fa, fb, test);
        }

        row.wall_ms = elapsed_ms(t0);
        rows[static_cast<std::size_t>(task)] = row;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

std::string model_json(const Model& model) {
    nlohmann::json j;
    j["chi"] = model.chi;
    j["xi"] = model.xi;
    j["sigma"] = model.sigma;
    j["dim"] = model.dim;
    j["x_max"] = model.x_max;
    return j.dump();
}

std::string config_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(model_json(config.model));
    j["p_values"] = config.p_values;
    j["lambda_over_p"] = config.lambda_over_p;
    j["seeds"] = config.seeds;
    j["estimators"] = {{"test_error", config.want_test_error},
                       {"replica", config.want_replica},
                       {"kare", config.want_kare},
                       {"sigma_f", config.want_sigma_f}};
    j["resolution_scale"] = config.resolution_scale;
    j["p_cap"] = config.p_cap;
    j["workers"] = config.workers;
    j["seed"] = config.seed;
    j["output_path"] = config.output_path;
    j["ridge_floor"] = defaults::kRidgeFloor;
    j["mc_test_points"] =
        std::max(defaults::kMcTestPointsMin,
                 static_cast<int>(std::lround(defaults::kMcTestPoints *
                                              config.resolution_scale)));
    j["holdout_fraction"] = defaults::kHoldoutFraction;
    return j.dump();
}

void write_rows_csv(std::ostream& out, const std::vector<ExperimentRow>& rows,
                    const ExperimentConfig& config) {
    out << "# config = " << config_json(config) << "\n";
    out << "# version = " << defaults::kVersion << "\n";
    out << "# seed = " << config.seed << "\n";
    out << "p,lambda_over_p,lambda,seed,test_error,replica_error,kare,"
           "sigma_f,wall_ms\n";
    char wall[32];
    for (const ExperimentRow& r : rows) {
        std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
        out << r.p << ',' << num(r.lambda_over_p) << ',' << num(r.lambda)
            << ',' << r.seed << ',' << opt_num(r.test_error) << ','
            << opt_num(r.replica) << ',' << opt_num(r.kare) << ','
            << opt_num(r.sigma_f) << ',' << wall << "\n";
    }
}

void write_rows_csv(const std::string& path,
                    const std::vector<ExperimentRow>& rows,
                    const ExperimentConfig& config) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_rows_csv: cannot write '" + path + "'");
    }
    write_rows_csv(out, rows, config);
}

void write_spectrum_csv(std::ostream& out, const Spectrum& sp,
                        const Model& model) {
    out << "# model = " << model_json(model) << "\n";
    out << "# version = " << defaults::kVersion << "\n";
    out << "# tail_amp = " << num(sp.tail_amp) << "\n";
    out << "# tail_index = " << num(sp.tail_index) << "\n";
    out << "rank,eigenvalue,parity,coefficient,provenance\n";
    for (const SpectrumRow& r : sp.rows) {
        out << r.rank << ',' << num(r.eigenvalue) << ',' << r.parity << ','
            << num(r.coefficient) << ','
            << rank_source_name(r.eigenvalue_source) << "\n";
    }
}

void write_spectrum_csv(const std::string& path, const Spectrum& sp,
                        const Model& model) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_spectrum_csv: cannot write '" + path + "'");
    }
    write_spectrum_csv(out, sp, model);
}

namespace {

RankSource parse_rank_source(const std::string& name, int line_no) {
    if (name == "gram") return RankSource::kGram;
    if (name == "scheme") return RankSource::kScheme;
    if (name == "exact") return RankSource::kExact;
    if (name == "extrapolated") return RankSource::kExtrapolated;
    if (name == "parity") return RankSource::kParity;
    throw ConfigError("read_spectrum_csv: line " + std::to_string(line_no) +
                      ": unknown provenance '" + name + "'");
}

}  // namespace

Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("read_spectrum_csv: cannot open '" + path + "'");
    }
    Spectrum sp;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(" \t"));
                key.erase(key.find_last_not_of(" \t") + 1);
                if (key == "tail_amp") {
                    sp.tail_amp = parse_double(line.substr(eq + 1), line_no);
                } else if (key == "tail_index") {
                    sp.tail_index = parse_double(line.substr(eq + 1), line_no);
                }
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;  // column header row
            continue;
        }
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ConfigError("read_spectrum_csv: line " +
                              std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) +
                              " fields, expected 5");
        }
        SpectrumRow r;
        r.rank = static_cast<int>(parse_double(fields[0], line_no));
        r.eigenvalue = parse_double(fields[1], line_no);
        r.parity = static_cast<int>(parse_double(fields[2], line_no));
        r.coefficient = parse_double(fields[3], line_no);
        std::string prov = fields[4];
        prov.erase(0, prov.find_first_not_of(" \t"));
        prov.erase(prov.find_last_not_of(" \t") + 1);
        r.eigenvalue_source = parse_rank_source(prov, line_no);
        r.coefficient_source =
            r.parity > 0 ? RankSource::kParity : RankSource::kExact;
        sp.rows.push_back(r);
    }
    if (sp.rows.empty()) {
        throw ConfigError("read_spectrum_csv: no rows in '" + path + "'");
    }
    return sp;
}

}  // namespace krrlab
