#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "herdsim/grid.hpp"

using namespace herdsim;

namespace {

GridConfig grid(int n, int r = 2) {
    GridConfig g;
    g.side_length = n;
    g.fov_radius = r;
    return g;
}

// Brute-force patch: every in-bounds cell within Chebyshev r.
std::vector<Cell> patch_oracle(const Cell& pos, int r, int n) {
    std::vector<Cell> out;
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
            if (std::max(std::abs(row - pos.row), std::abs(col - pos.col)) <= r) out.push_back({row, col});
    return out;
}

}  // namespace

TEST(GridConfig, ValidatesRanges) {
    EXPECT_NO_THROW(grid(50).validate());
    auto g = grid(50);
    g.coordination_k = 5;
    EXPECT_THROW(g.validate(), ConfigError);
    g = grid(0);
    EXPECT_THROW(g.validate(), ConfigError);
    g = grid(50, -1);
    EXPECT_THROW(g.validate(), ConfigError);
    EXPECT_EQ(grid(50).cell_count(), 2500u);
}

TEST(PlaceTarget, SingleCellGrid) {
    Rng rng(7);
    EXPECT_EQ(place_target(grid(1), rng), (Cell{0, 0}));
}

TEST(PlaceTarget, SameSeedSameCell) {
    Rng a(12345), b(12345);
    EXPECT_EQ(place_target(grid(50), a), place_target(grid(50), b));
}

TEST(PlaceTarget, UniformChiSquare) {
    const auto cfg = grid(50);
    const int draws = 100000;
    std::vector<int> counts(cfg.cell_count(), 0);
    for (int i = 0; i < draws; ++i) {
        Rng rng = make_stream(derive_episode_seed(99, 0, static_cast<std::uint64_t>(i)), Stream::target);
        ++counts[cell_index(place_target(cfg, rng), 50)];
    }
    const double expected = static_cast<double>(draws) / 2500.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double dof = 2499.0;
    EXPECT_LT(std::abs(chi2 - dof), 5.0 * std::sqrt(2.0 * dof)) << "chi2 = " << chi2;
}

TEST(Observe, InteriorPatchHas25Cells) {
    const auto obs = observe({25, 25}, {0, 0}, grid(50));
    EXPECT_EQ(obs.visible_cells.size(), 25u);
    EXPECT_FALSE(obs.target_detected);
}

TEST(Observe, CornerPatchIsClipped) {
    EXPECT_EQ(observe({0, 0}, {49, 49}, grid(50)).visible_cells.size(), 9u);
}

TEST(Observe, TargetUnderAgentIsDetected) {
    const auto obs = observe({10, 10}, {10, 10}, grid(50));
    ASSERT_TRUE(obs.target_detected);
    EXPECT_EQ(*obs.target_detected, (Cell{10, 10}));
}

TEST(Observe, MatchesBruteForceEverywhereOnSmallGrid) {
    const int n = 7;
    for (int r = 0; r <= 3; ++r)
        for (int pr = 0; pr < n; ++pr)
            for (int pc = 0; pc < n; ++pc)
                for (int tr = 0; tr < n; tr += 2)
                    for (int tc = 0; tc < n; tc += 3) {
                        const Cell pos{pr, pc}, target{tr, tc};
                        const auto obs = observe(pos, target, grid(n, r));
                        const auto oracle = patch_oracle(pos, r, n);
                        ASSERT_EQ(obs.visible_cells, oracle);
                        const bool near = chebyshev(pos, target) <= r;
                        ASSERT_EQ(obs.target_detected.has_value(), near);
                        if (near) {
                            ASSERT_TRUE(std::find(oracle.begin(), oracle.end(), target) != oracle.end());
                        }
                        ASSERT_LE(obs.visible_cells.size(), static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
                    }
}

TEST(StepToward, UniqueImprovingMove) {
    Rng rng(1);
    EXPECT_EQ(step_toward({0, 0}, {0, 5}, rng), (Cell{0, 1}));
    EXPECT_EQ(step_toward({4, 2}, {0, 2}, rng), (Cell{3, 2}));
}

TEST(StepToward, AtGoalStays) {
    Rng rng(1);
    EXPECT_EQ(step_toward({3, 3}, {3, 3}, rng), (Cell{3, 3}));
}

TEST(StepToward, TieBreakIsFair) {
    int row_moves = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        Rng rng = make_stream(derive_episode_seed(5, 1, static_cast<std::uint64_t>(i)), Stream::tie_break);
        const Cell next = step_toward({0, 0}, {3, 3}, rng);
        ASSERT_TRUE(next == (Cell{1, 0}) || next == (Cell{0, 1}));
        row_moves += next == Cell{1, 0} ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(row_moves) / trials, 0.5, 0.05);
}

TEST(StepToward, AlwaysReducesManhattanByOne) {
    Rng rng(3);
    for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b)
            for (int c = 0; c < 9; ++c)
                for (int d = 0; d < 9; ++d) {
                    const Cell pos{a, b}, goal{c, d};
                    if (pos == goal) continue;
                    const Cell next = step_toward(pos, goal, rng);
                    ASSERT_EQ(manhattan(next, goal), manhattan(pos, goal) - 1);
                    ASSERT_EQ(manhattan(pos, next), 1);
                }
}

TEST(StartPositions, FourCornersInOrder) {
    const auto s = start_positions(grid(50));
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0], (Cell{0, 0}));
    EXPECT_EQ(s[1], (Cell{0, 49}));
    EXPECT_EQ(s[2], (Cell{49, 0}));
    EXPECT_EQ(s[3], (Cell{49, 49}));
}

TEST(StartPositions, OtherTeamSizesOnPerimeter) {
    for (int n : {1, 2, 3, 5, 8}) {
        auto g = grid(10);
        g.agent_count = n;
        g.coordination_k = 1;
        const auto s = start_positions(g);
        ASSERT_EQ(s.size(), static_cast<std::size_t>(n));
        std::set<Cell> distinct(s.begin(), s.end());
        EXPECT_EQ(distinct.size(), s.size());
        for (const auto& c : s) {
            EXPECT_TRUE(in_bounds(c, 10));
            EXPECT_TRUE(c.row == 0 || c.row == 9 || c.col == 0 || c.col == 9);
        }
    }
}
