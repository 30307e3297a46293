#pragma once

// Reliability and cohort statistics: ICC(3,1), permutation t-test with a
// Welch statistic, Benjamini-Hochberg FDR, and ordinary least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace vt {

// n_subjects x n_scans, row-major, no missing values.
struct MeasurementTable {
    int n_subjects = 0;
    int n_scans = 0;
    std::vector<double> data;

    MeasurementTable() = default;
    MeasurementTable(int subjects, int scans)
        : n_subjects(subjects), n_scans(scans), data(size_t(subjects) * size_t(scans), 0.0) {
        if (subjects < 2 || scans < 2)
            throw std::invalid_argument("MeasurementTable: need >= 2 subjects and >= 2 scans");
    }
    double& operator()(int s, int k) { return data[size_t(s) * size_t(n_scans) + size_t(k)]; }
    double operator()(int s, int k) const { return data[size_t(s) * size_t(n_scans) + size_t(k)]; }
};

// Two-way mixed, consistency, single measure:
// (MS_rows - MS_err) / (MS_rows + (k-1) MS_err). Degenerate zero-variance
// tables score 1 (perfect agreement).
inline double icc_3_1(const MeasurementTable& t) {
    const int n = t.n_subjects, k = t.n_scans;
    const double total_n = double(n) * k;

    double grand = 0.0;
    for (double v : t.data) grand += v;
    grand /= total_n;

    std::vector<double> row_mean(size_t(n), 0.0), col_mean(size_t(k), 0.0);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < k; ++c) {
            row_mean[size_t(s)] += t(s, c) / k;
            col_mean[size_t(c)] += t(s, c) / n;
        }

    double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0;
    for (int s = 0; s < n; ++s) ss_rows += k * (row_mean[size_t(s)] - grand) * (row_mean[size_t(s)] - grand);
    for (int c = 0; c < k; ++c) ss_cols += n * (col_mean[size_t(c)] - grand) * (col_mean[size_t(c)] - grand);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < k; ++c) ss_total += (t(s, c) - grand) * (t(s, c) - grand);
    double ss_err = ss_total - ss_rows - ss_cols;

    double ms_rows = ss_rows / (n - 1);
    double ms_err = ss_err / double((n - 1) * (k - 1));
    double denom = ms_rows + (k - 1) * ms_err;
    if (denom == 0.0) return 1.0;
    return (ms_rows - ms_err) / denom;
}

inline double welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    auto stats = [](const std::vector<double>& x) {
        double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
        double v = 0.0;
        for (double xi : x) v += (xi - m) * (xi - m);
        v /= double(x.size() - 1);
        return std::pair<double, double>(m, v);
    };
    auto [ma, va] = stats(a);
    auto [mb, vb] = stats(b);
    double se2 = va / double(a.size()) + vb / double(b.size());
    if (se2 == 0.0) return 0.0;
    return (ma - mb) / std::sqrt(se2);
}

struct PermutationTestResult {
    double t_observed = 0.0;
    double p = 1.0;
};

namespace detail {

// Portable bounded draw + Fisher-Yates so results do not depend on the
// standard library's distribution implementation.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

inline void shuffle(std::vector<double>& v, std::mt19937_64& rng) {
    for (size_t i = v.size() - 1; i > 0; --i)
        std::swap(v[i], v[size_t(bounded(rng, i + 1))]);
}

}  // namespace detail

// Two-sample permutation test on the Welch t statistic, two-sided.
// p = (1 + #{|t*| >= |t_obs|}) / (1 + iterations).
inline PermutationTestResult permutation_t_test(const std::vector<double>& a,
                                                const std::vector<double>& b,
                                                int iterations = 10000,
                                                std::uint64_t seed = 0) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("permutation_t_test: both samples need >= 2 values");
    PermutationTestResult r;
    r.t_observed = welch_t(a, b);

    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    double var = 0.0, mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / double(pooled.size());
    for (double x : pooled) var += (x - mean) * (x - mean);
    if (var == 0.0) {
        r.p = 1.0;
        return r;
    }

    std::mt19937_64 rng(seed);
    const double t_abs = std::abs(r.t_observed);
    int hits = 0;
    std::vector<double> pa(a.size()), pb(b.size());
    for (int it = 0; it < iterations; ++it) {
        detail::shuffle(pooled, rng);
        std::copy(pooled.begin(), pooled.begin() + long(a.size()), pa.begin());
        std::copy(pooled.begin() + long(a.size()), pooled.end(), pb.begin());
        if (std::abs(welch_t(pa, pb)) >= t_abs) ++hits;
    }
    r.p = double(1 + hits) / double(1 + iterations);
    return r;
}

// Benjamini-Hochberg step-up adjusted p-values.
inline std::vector<double> bh_fdr(const std::vector<double>& pvals) {
    const size_t n = pvals.size();
    for (double p : pvals)
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("bh_fdr: p-values must be in [0,1]");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t i, size_t j) { return pvals[i] < pvals[j]; });
    std::vector<double> adj(n, 0.0);
    double running = 1.0;
    for (size_t r = n; r > 0; --r) {
        size_t i = order[r - 1];
        running = std::min(running, pvals[i] * double(n) / double(r));
        adj[i] = running;
    }
    return adj;
}

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r = 0.0;
};

inline RegressionResult linear_regression(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_regression: need matching samples, n >= 2");
    const double n = double(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_regression: zero x variance");
    RegressionResult res;
    res.slope = sxy / sxx;
    res.intercept = my - res.slope * mx;
    res.r = syy == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
    return res;
}

}  // namespace vt
