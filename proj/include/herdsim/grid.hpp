#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "herdsim/error.hpp"
#include "herdsim/rng.hpp"

namespace herdsim {

using AgentId = std::uint32_t;
using Timestep = std::uint32_t;  // steps are numbered from 1

struct GridConfig {
    int side_length = 50;   // N
    int fov_radius = 2;     // r, Chebyshev
    int agent_count = 4;    // n
    int max_steps = 200;    // T
    int coordination_k = 3; // agents that must reach the target

    std::size_t cell_count() const {
        return static_cast<std::size_t>(side_length) * static_cast<std::size_t>(side_length);
    }

    void validate() const {
        if (side_length < 1) throw ConfigError("side_length must be positive");
        if (side_length > 255) throw ConfigError("side_length must be at most 255");
        if (fov_radius < 0) throw ConfigError("fov_radius must be non-negative");
        if (agent_count < 1 || agent_count > 255)
            throw ConfigError("agent_count must be in [1, 255]");
        if (max_steps < 1 || max_steps > 65535) throw ConfigError("max_steps must be in [1, 65535]");
        if (coordination_k < 1 || coordination_k > agent_count)
            throw ConfigError("coordination_k must be in [1, agent_count]");
    }
};

struct Cell {
    int row = 0;
    int col = 0;

    friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

inline std::string to_string(const Cell& c) {
    return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

// Row-major flat index; `cols` is the row width.
constexpr std::size_t cell_index(const Cell& c, int cols) {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(c.col);
}

constexpr Cell cell_at(std::size_t index, int cols) {
    return Cell{static_cast<int>(index / static_cast<std::size_t>(cols)),
                static_cast<int>(index % static_cast<std::size_t>(cols))};
}

inline int chebyshev(const Cell& a, const Cell& b) {
    return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

inline int manhattan(const Cell& a, const Cell& b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

inline bool in_bounds(const Cell& c, int side) {
    return c.row >= 0 && c.row < side && c.col >= 0 && c.col < side;
}

struct Observation {
    // Row-major order.
    std::vector<Cell> visible_cells;
    std::optional<Cell> target_detected;
};

inline Cell place_target(const GridConfig& cfg, Rng& rng) {
    const auto idx = rng.below(cfg.cell_count());
    return cell_at(static_cast<std::size_t>(idx), cfg.side_length);
}

// Perfect binary sensor over the Chebyshev patch, clipped at the walls.
inline Observation observe(const Cell& pos, const Cell& target, const GridConfig& cfg) {
    Observation obs;
    const int r = cfg.fov_radius;
    const int n = cfg.side_length;
    const int r0 = std::max(0, pos.row - r), r1 = std::min(n - 1, pos.row + r);
    const int c0 = std::max(0, pos.col - r), c1 = std::min(n - 1, pos.col + r);
    obs.visible_cells.reserve(static_cast<std::size_t>((r1 - r0 + 1) * (c1 - c0 + 1)));
    for (int row = r0; row <= r1; ++row)
        for (int col = c0; col <= c1; ++col) obs.visible_cells.push_back(Cell{row, col});
    if (chebyshev(pos, target) <= r) obs.target_detected = target;
    return obs;
}

// One cardinal step that reduces Manhattan distance by exactly one.
// When both axes improve, the axis is picked with a fair coin from `rng`.
inline Cell step_toward(const Cell& pos, const Cell& goal, Rng& rng) {
    const bool row_differs = pos.row != goal.row;
    const bool col_differs = pos.col != goal.col;
    if (!row_differs && !col_differs) return pos;
    bool move_row = row_differs;
    if (row_differs && col_differs) move_row = rng.below(2) == 0;
    Cell next = pos;
    if (move_row)
        next.row += goal.row > pos.row ? 1 : -1;
    else
        next.col += goal.col > pos.col ? 1 : -1;
    return next;
}

// Four agents start at the corners in the order (0,0), (0,N-1), (N-1,0),
// (N-1,N-1). Other team sizes are spread evenly along the perimeter,
// walking clockwise from (0,0).
inline std::vector<Cell> start_positions(const GridConfig& cfg) {
    const int n = cfg.side_length;
    const int last = n - 1;
    std::vector<Cell> starts;
    starts.reserve(static_cast<std::size_t>(cfg.agent_count));
    if (cfg.agent_count == 4) {
        starts = {Cell{0, 0}, Cell{0, last}, Cell{last, 0}, Cell{last, last}};
        return starts;
    }
    if (n == 1) {
        starts.assign(static_cast<std::size_t>(cfg.agent_count), Cell{0, 0});
        return starts;
    }
    const long perimeter = 4L * last;
    for (int i = 0; i < cfg.agent_count; ++i) {
        const long s = (perimeter * i) / cfg.agent_count;
        Cell c;
        if (s < last) {
            c = {0, static_cast<int>(s)};
        } else if (s < 2L * last) {
            c = {static_cast<int>(s - last), last};
        } else if (s < 3L * last) {
            c = {last, static_cast<int>(last - (s - 2L * last))};
        } else {
            c = {static_cast<int>(last - (s - 3L * last)), 0};
        }
        starts.push_back(c);
    }
    return starts;
}

}  // namespace herdsim
