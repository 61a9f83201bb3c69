#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "herdsim/metrics.hpp"

using namespace herdsim;

namespace {

// Direct evaluation of the midpoint form, no floor needed on these inputs.
double jsd_oracle(const std::vector<double>& p, const std::vector<double>& q) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0) total += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0) total += 0.5 * q[i] * std::log(q[i] / m);
    }
    return total;
}

Belief point(int n, std::size_t at) {
    std::vector<double> w(static_cast<std::size_t>(n * n), 0.0);
    w[at] = 1.0;
    return Belief::from_probabilities(w, n, n);
}

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) s += v = -std::log(1.0 - rng.uniform());
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace

TEST(Jsd, TwoCellExample) {
    const std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
    EXPECT_NEAR(jsd(p, q), jsd_oracle(p, q), 1e-12);
    // By hand in nats: 0.5 * (0.08718 + 0.11632).
    EXPECT_NEAR(jsd(p, q), 0.10175, 1e-4);
    EXPECT_NEAR(jsd(Belief::from_probabilities(p), Belief::from_probabilities(q)), 0.10175, 1e-4);
}

TEST(Jsd, IdenticalIsZeroAndDisjointIsLn2) {
    const auto a = point(5, 3), b = point(5, 20);
    EXPECT_NEAR(jsd(a, a), 0.0, 1e-12);
    EXPECT_NEAR(jsd(a, b), std::numbers::ln2, 1e-9);
}

TEST(Jsd, RandomPairsSymmetricBoundedAndMatchOracle) {
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const auto n = 2 + rng.below(40);
        const auto p = random_distribution(rng, n), q = random_distribution(rng, n);
        const double d = jsd(p, q);
        ASSERT_NEAR(d, jsd(q, p), 1e-12);
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, std::numbers::ln2 + 1e-9);
        ASSERT_NEAR(d, jsd_oracle(p, q), 1e-9);
        ASSERT_NEAR(jsd(p, p), 0.0, 1e-12);
    }
}

TEST(Jsd, DimensionMismatchThrows) {
    const std::vector<double> p{0.5, 0.5}, q{1.0};
    EXPECT_THROW(jsd(p, q), ConfigError);
}

TEST(MeanPairwiseJsd, TwoPairsOfDisjointPointMasses) {
    const std::vector<Belief> bs{point(4, 0), point(4, 0), point(4, 9), point(4, 9)};
    EXPECT_NEAR(mean_pairwise_jsd(bs), 4.0 * std::numbers::ln2 / 6.0, 1e-9);
    EXPECT_NEAR(mean_pairwise_jsd(bs), 0.4621, 1e-4);
    const std::vector<Belief> permuted{bs[2], bs[0], bs[3], bs[1]};
    EXPECT_NEAR(mean_pairwise_jsd(permuted), mean_pairwise_jsd(bs), 1e-15);
}

TEST(MeanPairwiseJsd, IdenticalIsZeroAndNeedsTwo) {
    const auto b = Belief::uniform(3, 3);
    const std::vector<Belief> same{b, b, b};
    EXPECT_NEAR(mean_pairwise_jsd(same), 0.0, 1e-12);
    const std::vector<Belief> one{b};
    EXPECT_THROW(mean_pairwise_jsd(one), ConfigError);
}

TEST(Alignment, Examples) {
    const Cell target{7, 8};
    const std::size_t t = cell_index(target, 50);
    const std::vector<Belief> sure{point(50, t), point(50, t)};
    // 2499 floored cells take 2.5e-9 of the mass.
    EXPECT_NEAR(mean_alignment(sure, target), 1.0, 1e-8);
    const std::vector<Belief> flat{Belief::uniform(50, 50), Belief::uniform(50, 50)};
    EXPECT_NEAR(mean_alignment(flat, target), 4e-4, 1e-15);
    const std::vector<Belief> half{point(50, t), point(50, t), Belief::uniform(50, 50), Belief::uniform(50, 50)};
    EXPECT_NEAR(mean_alignment(half, target), 0.5002, 1e-6);
}

TEST(Meh, Predicate) {
    const MehConfig cfg{0.1};
    EXPECT_FALSE(classify_meh(true, 0.0, cfg).herded());
    EXPECT_TRUE(classify_meh(false, 0.005, cfg).herded());
    EXPECT_FALSE(classify_meh(false, 0.45, cfg).herded());
    const auto c = classify_meh(false, 0.05, cfg);
    EXPECT_EQ(c.meh_failed_denominator, c.meh_all_denominator);
}

TEST(Meh, MonotoneInEpsilon) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double j = rng.uniform(0.0, 0.69);
        const double e1 = rng.uniform(0.001, 0.6);
        const double e2 = rng.uniform(e1, 0.69);
        if (classify_meh(false, j, {e1}).herded()) {
            ASSERT_TRUE(classify_meh(false, j, {e2}).herded());
        }
    }
}

TEST(Meh, EpsilonValidated) {
    EXPECT_THROW((MehConfig{0.0}.validate()), ConfigError);
    EXPECT_THROW((MehConfig{0.7}.validate()), ConfigError);
    EXPECT_NO_THROW((MehConfig{0.2}.validate()));
}

TEST(Meh, DenominatorIdentity) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EpisodeResult> eps(1 + rng.below(60));
        for (auto& e : eps) {
            e.success = rng.bernoulli(0.4);
            const bool herded = !e.success && rng.bernoulli(0.7);
            e.meh_all_denominator = e.meh_failed_denominator = herded;
        }
        const auto r = meh_rates(eps);
        const double failures =
            static_cast<double>(std::count_if(eps.begin(), eps.end(), [](const auto& e) { return !e.success; }));
        ASSERT_NEAR(r.all, r.failed * failures / static_cast<double>(eps.size()), 1e-12);
    }
    EXPECT_EQ(meh_rates({}).all, 0.0);
}

TEST(AlignmentPerByte, Examples) {
    EXPECT_NEAR(*alignment_per_byte(0.7, 700), 1e-3, 1e-15);
    EXPECT_FALSE(alignment_per_byte(0.5, 0));
    EXPECT_NEAR(*alignment_per_byte(0.657, 56161) * 1e6, 11.7, 0.05);
}
