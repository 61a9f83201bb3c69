#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "herdsim/error.hpp"

namespace herdsim {

// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Two-sided tail probability for a standard normal statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

enum class MwuMethod { automatic, exact, normal };

// Pooled sizes up to this use the exact null distribution.
inline constexpr std::size_t kMwuExactMaxTotal = 30;

struct MwuResult {
    double u_a = 0.0;      // U for sample a: pairs (a > b) plus half the ties
    double u = 0.0;        // min(U_a, U_b)
    double z = 0.0;        // normal statistic, continuity corrected (0 for exact)
    double p_value = 1.0;  // two-sided
    bool exact = false;
};

namespace detail {

// Midranks (1-based) of the pooled sample, plus the tie term sum(t^3 - t).
inline std::vector<double> midranks(std::span<const double> pooled, double& tie_term) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = mid;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

// Exact two-sided p under random relabelling of the pooled midranks.
// Midranks are multiples of 1/2, so rank sums are counted on a doubled
// integer scale.
inline double mwu_exact_p(const std::vector<double>& ranks, std::size_t n_a, double u_a) {
    const std::size_t n = ranks.size();
    std::vector<long> r2(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r2[i] = std::lround(2.0 * ranks[i]);
        total += r2[i];
    }
    // counts[k][s]: subsets of size k with doubled rank sum s.
    std::vector<std::vector<double>> counts(n_a + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    counts[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = std::min(n_a, i + 1); k >= 1; --k)
            for (long s = total; s >= r2[i]; --s)
                counts[k][static_cast<std::size_t>(s)] += counts[k - 1][static_cast<std::size_t>(s - r2[i])];

    const double n_b = static_cast<double>(n - n_a);
    const double center = 0.5 * static_cast<double>(n_a) * n_b;
    const double observed = std::abs(u_a - center);
    const double offset = static_cast<double>(n_a) * (static_cast<double>(n_a) + 1.0) / 2.0;
    double extreme = 0.0, all = 0.0;
    for (long s = 0; s <= total; ++s) {
        const double c = counts[n_a][static_cast<std::size_t>(s)];
        if (c == 0.0) continue;
        all += c;
        const double u = 0.5 * static_cast<double>(s) - offset;
        if (std::abs(u - center) >= observed - 1e-9) extreme += c;
    }
    return std::min(1.0, extreme / all);
}

}  // namespace detail

// Two-sided Mann-Whitney U test with midranks for ties. The automatic
// method is exact for small pooled samples and otherwise uses the normal
// approximation with tie-corrected variance and continuity correction.
inline MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                MwuMethod method = MwuMethod::automatic) {
    if (a.empty() || b.empty()) throw StatsError("mann_whitney_u: both samples must be nonempty");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    for (double v : pooled)
        if (std::isnan(v)) throw StatsError("mann_whitney_u: NaN in sample");

    double tie_term = 0.0;
    const auto ranks = detail::midranks(pooled, tie_term);
    const double n_a = static_cast<double>(a.size());
    const double n_b = static_cast<double>(b.size());
    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];

    MwuResult r;
    r.u_a = rank_sum_a - n_a * (n_a + 1.0) / 2.0;
    r.u = std::min(r.u_a, n_a * n_b - r.u_a);

    const bool exact = method == MwuMethod::exact ||
                       (method == MwuMethod::automatic && pooled.size() <= kMwuExactMaxTotal);
    if (exact) {
        r.exact = true;
        r.p_value = detail::mwu_exact_p(ranks, a.size(), r.u_a);
        return r;
    }

    const double n = n_a + n_b;
    const double mean = n_a * n_b / 2.0;
    const double var = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(var > 0.0)) return r;  // every value tied
    const double dev = std::max(std::abs(r.u_a - mean) - 0.5, 0.0);
    r.z = dev / std::sqrt(var);
    r.p_value = std::min(1.0, normal_two_sided_p(r.z));
    return r;
}

struct ProportionTest {
    double z = 0.0;
    double p_value = 1.0;
};

// Pooled two-proportion z test, two-sided. A zero pooled variance (both
// rates 0 or both 1) is reported as no difference.
inline ProportionTest two_proportion_z(std::size_t successes_a, std::size_t n_a, std::size_t successes_b,
                                       std::size_t n_b) {
    if (n_a == 0 || n_b == 0) throw StatsError("two_proportion_z: zero trials");
    if (successes_a > n_a || successes_b > n_b) throw StatsError("two_proportion_z: successes exceed trials");
    const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
    const double pa = static_cast<double>(successes_a) / na;
    const double pb = static_cast<double>(successes_b) / nb;
    const double pooled = static_cast<double>(successes_a + successes_b) / (na + nb);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
    if (!(se > 0.0)) return {};
    ProportionTest t;
    t.z = (pa - pb) / se;
    t.p_value = std::min(1.0, normal_two_sided_p(t.z));
    return t;
}

namespace detail {

inline void check_bh_inputs(std::span<const double> p_values, double q) {
    if (!(q > 0.0 && q < 1.0)) throw StatsError("benjamini_hochberg: q must be in (0, 1)");
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0)) throw StatsError("benjamini_hochberg: p-values must be in [0, 1]");
}

}  // namespace detail

// Step-up procedure: reject the i smallest p-values, where i is the largest
// rank with p_(i) <= i q / m. Decisions come back in input order.
inline std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double q = 0.05) {
    detail::check_bh_inputs(p_values, q);
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    std::size_t cutoff = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (p_values[order[i]] <= static_cast<double>(i + 1) / static_cast<double>(m) * q) cutoff = i + 1;
    std::vector<bool> reject(m, false);
    for (std::size_t i = 0; i < cutoff; ++i) reject[order[i]] = true;
    return reject;
}

// BH-adjusted p-values (q-values), in input order.
inline std::vector<double> bh_adjusted(std::span<const double> p_values) {
    detail::check_bh_inputs(p_values, 0.5);
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double v = p_values[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, v);
        adjusted[order[r]] = running;
    }
    return adjusted;
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;  // sample SD (n - 1); 0 for a single value
};

inline Moments mean_sd(std::span<const double> xs) {
    Moments m;
    if (xs.empty()) return m;
    double s = 0.0;
    for (double x : xs) s += x;
    m.mean = s / static_cast<double>(xs.size());
    if (xs.size() < 2) return m;
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return m;
}

}  // namespace herdsim
