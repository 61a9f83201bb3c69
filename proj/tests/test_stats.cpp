#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "herdsim/rng.hpp"
#include "herdsim/stats.hpp"

using namespace herdsim;

namespace {

double u_of(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0.0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return u;
}

// Enumerates every way of choosing which pooled values form sample a.
double permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), na = a.size();
    const double center = 0.5 * static_cast<double>(na * b.size());
    const double observed = std::abs(u_of(a, b) - center);
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(na), true);
    double extreme = 0.0, total = 0.0;
    do {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) (pick[i] ? x : y).push_back(pooled[i]);
        total += 1.0;
        if (std::abs(u_of(x, y) - center) >= observed - 1e-9) extreme += 1.0;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return extreme / total;
}

}  // namespace

TEST(MannWhitney, ExactMatchesPermutationOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const auto na = 1 + rng.below(7), nb = 1 + rng.below(8 - std::min<std::uint64_t>(na, 7));
        std::vector<double> a(na), b(nb);
        // Small integer support forces plenty of ties.
        for (auto& v : a) v = static_cast<double>(rng.below(5));
        for (auto& v : b) v = static_cast<double>(rng.below(5));
        const auto r = mann_whitney_u(a, b, MwuMethod::exact);
        ASSERT_TRUE(r.exact);
        ASSERT_NEAR(r.u_a, u_of(a, b), 1e-12);
        ASSERT_NEAR(r.p_value, permutation_p(a, b), 1e-9) << "trial " << trial;
    }
}

TEST(MannWhitney, SeparatedTriples) {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const auto exact = mann_whitney_u(a, b);
    EXPECT_TRUE(exact.exact);
    EXPECT_EQ(exact.u, 0.0);
    EXPECT_NEAR(exact.p_value, 0.1, 1e-12);
    const auto approx = mann_whitney_u(a, b, MwuMethod::normal);
    EXPECT_FALSE(approx.exact);
    EXPECT_NEAR(approx.p_value, 0.0809, 5e-4);
}

TEST(MannWhitney, IdenticalSamples) {
    std::vector<double> a(20), b(20);
    for (int i = 0; i < 20; ++i) a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] = i * 0.5;
    const auto r = mann_whitney_u(a, b);
    EXPECT_NEAR(r.u, 200.0, 1e-12);
    EXPECT_NEAR(r.p_value, 1.0, 1e-9);
}

TEST(MannWhitney, AllTiedLargeSample) {
    const std::vector<double> a(40, 1.0), b(40, 1.0);
    EXPECT_EQ(mann_whitney_u(a, b).p_value, 1.0);
}

TEST(MannWhitney, RejectsBadInput) {
    const std::vector<double> empty, one{1.0}, bad{NAN};
    EXPECT_THROW(mann_whitney_u(empty, one), StatsError);
    EXPECT_THROW(mann_whitney_u(one, bad), StatsError);
}

TEST(MannWhitney, NormalApproximationCloseToExactAtModerateSize) {
    Rng rng(8);
    std::vector<double> a(15), b(15);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform() + 0.3;
    const double exact = mann_whitney_u(a, b, MwuMethod::exact).p_value;
    const double normal = mann_whitney_u(a, b, MwuMethod::normal).p_value;
    EXPECT_NEAR(exact, normal, 0.01);
}

TEST(TwoProportion, Examples) {
    const auto t = two_proportion_z(60, 100, 40, 100);
    EXPECT_NEAR(t.z, 2.828, 1e-3);
    EXPECT_NEAR(t.p_value, 0.0047, 1e-4);
    EXPECT_NEAR(two_proportion_z(40, 100, 60, 100).z, -t.z, 1e-12);
    EXPECT_EQ(two_proportion_z(30, 100, 30, 100).z, 0.0);
    EXPECT_EQ(two_proportion_z(30, 100, 30, 100).p_value, 1.0);
    EXPECT_EQ(two_proportion_z(0, 10, 0, 10).p_value, 1.0);
}

TEST(TwoProportion, RejectsBadCounts) {
    EXPECT_THROW(two_proportion_z(1, 0, 1, 2), StatsError);
    EXPECT_THROW(two_proportion_z(3, 2, 1, 2), StatsError);
}

TEST(BenjaminiHochberg, HandWorkedCase) {
    const std::vector<double> p{0.001, 0.03, 0.02, 0.5};
    EXPECT_EQ(benjamini_hochberg(p, 0.05), (std::vector<bool>{true, true, true, false}));
    const std::vector<double> none{0.9, 0.8};
    EXPECT_EQ(benjamini_hochberg(none, 0.05), (std::vector<bool>{false, false}));
    EXPECT_TRUE(benjamini_hochberg({}, 0.05).empty());
}

TEST(BenjaminiHochberg, StepUpRescuesEarlierRanks) {
    // 0.04 > 1*0.05/4 but the largest rank passes, so everything below it is rejected.
    const std::vector<double> p{0.04, 0.045, 0.046, 0.049};
    EXPECT_EQ(benjamini_hochberg(p, 0.05), (std::vector<bool>(4, true)));
}

TEST(BenjaminiHochberg, RejectionsMonotoneInQ) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(1 + rng.below(30));
        for (auto& v : p) v = rng.uniform() * rng.uniform();
        const auto lo = benjamini_hochberg(p, 0.01), hi = benjamini_hochberg(p, 0.1);
        for (std::size_t i = 0; i < p.size(); ++i) ASSERT_TRUE(!lo[i] || hi[i]);
        const auto adj = bh_adjusted(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            ASSERT_GE(adj[i], p[i] - 1e-15);
            ASSERT_EQ(adj[i] <= 0.1, static_cast<bool>(hi[i]));
        }
    }
}

TEST(BenjaminiHochberg, RejectsBadInput) {
    const std::vector<double> p{0.5, 1.2};
    EXPECT_THROW(benjamini_hochberg(p, 0.05), StatsError);
    const std::vector<double> ok{0.5};
    EXPECT_THROW(benjamini_hochberg(ok, 0.0), StatsError);
}

TEST(MeanSd, SampleStandardDeviation) {
    const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
    const auto m = mean_sd(xs);
    EXPECT_DOUBLE_EQ(m.mean, 5.0);
    EXPECT_NEAR(m.sd, std::sqrt(32.0 / 7.0), 1e-12);
    const std::vector<double> one{3.5};
    EXPECT_EQ(mean_sd(one).sd, 0.0);
    EXPECT_EQ(mean_sd({}).mean, 0.0);
}

TEST(NormalCdf, KnownValues) {
    EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
    EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
    EXPECT_NEAR(normal_two_sided_p(1.959963984540054), 0.05, 1e-12);
}
