#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "herdsim/error.hpp"
#include "herdsim/grid.hpp"
#include "herdsim/rng.hpp"

namespace herdsim {

inline constexpr double kProbabilityFloor = 1e-12;
inline const double kLogProbabilityFloor = std::log(kProbabilityFloor);
// Sender entropies below this are treated as this value when weighting.
inline constexpr double kEntropyFloor = 1e-6;

struct SensorModel {
    double miss_log_decrement = 2.0;  // nats removed from each cell seen empty
    double hit_log_increment = 20.0;  // nats added to the detected target cell

    void validate() const {
        if (!(miss_log_decrement > 0.0) || !std::isfinite(miss_log_decrement))
            throw ConfigError("miss_log_decrement must be positive and finite");
        if (!(hit_log_increment > 0.0) || !std::isfinite(hit_log_increment))
            throw ConfigError("hit_log_increment must be positive and finite");
    }
};

// Normalized categorical distribution over a rows x cols grid of cells.
//
// The log-probabilities are authoritative. A linear copy is kept in step
// with them so that sparse updates (a sensor patch, a handful of fused
// cells) renormalize with one multiply pass instead of a full
// exp/log-sum-exp pass, and so entropy needs no transcendental calls.
// Every public mutator leaves the belief normalized with every probability
// at or above kProbabilityFloor (up to the final renormalization).
class Belief {
public:
    Belief() = default;

    static Belief uniform(int rows, int cols) {
        check_shape(rows, cols);
        Belief b(rows, cols);
        const double n = static_cast<double>(b.size());
        std::fill(b.prob_.begin(), b.prob_.end(), 1.0 / n);
        std::fill(b.log_.begin(), b.log_.end(), -std::log(n));
        return b;
    }

    static Belief uniform_grid(const GridConfig& cfg) {
        return uniform(cfg.side_length, cfg.side_length);
    }

    // Nonnegative weights, renormalized. A single row when `rows` is 1.
    static Belief from_probabilities(std::span<const double> weights, int rows = 1, int cols = 0) {
        if (cols == 0) cols = static_cast<int>(weights.size()) / std::max(rows, 1);
        check_shape(rows, cols);
        if (weights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw ConfigError("weight count does not match belief shape");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be finite and >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw ConfigError("weights must not all be zero");
        Belief b(rows, cols);
        for (std::size_t i = 0; i < weights.size(); ++i) {
            b.prob_[i] = weights[i] / total;
            b.log_[i] = b.prob_[i] > 0.0 ? std::log(b.prob_[i]) : kLogProbabilityFloor;
        }
        b.renormalize();
        return b;
    }

    // Arbitrary (unnormalized) log weights.
    static Belief from_log_mass(std::span<const double> log_weights, int rows = 1, int cols = 0) {
        if (cols == 0) cols = static_cast<int>(log_weights.size()) / std::max(rows, 1);
        check_shape(rows, cols);
        if (log_weights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw ConfigError("log weight count does not match belief shape");
        Belief b(rows, cols);
        const double top = *std::max_element(log_weights.begin(), log_weights.end());
        if (!std::isfinite(top)) throw ConfigError("log weights must be finite");
        for (std::size_t i = 0; i < log_weights.size(); ++i) {
            b.log_[i] = log_weights[i] - top;
            b.prob_[i] = std::exp(b.log_[i]);
        }
        b.renormalize();
        return b;
    }

    std::size_t size() const { return log_.size(); }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    std::span<const double> log_mass() const { return log_; }
    std::span<const double> probabilities() const { return prob_; }

    double probability(std::size_t index) const { return prob_[index]; }
    double probability(const Cell& c) const { return prob_[cell_index(c, cols_)]; }
    Cell cell(std::size_t index) const { return cell_at(index, cols_); }
    std::size_t index(const Cell& c) const { return cell_index(c, cols_); }

    // Shannon entropy in nats.
    double entropy() const {
        if (dirty_) refresh_stats();
        return entropy_;
    }

    // First cell of maximal probability in row-major order.
    std::size_t argmax_index() const {
        if (dirty_) refresh_stats();
        return argmax_;
    }

    double total_mass() const { return sum(prob_); }

    // Sparse edits. Each batch of edits must be closed by renormalize().
    void add_log(std::size_t index, double delta) {
        log_[index] += delta;
        prob_[index] = std::exp(log_[index]);
        dirty_ = true;
    }

    void add_linear(std::size_t index, double delta) {
        prob_[index] += delta;
        log_[index] = std::log(prob_[index]);
        dirty_ = true;
    }

    // Scales to unit mass, raises anything below kProbabilityFloor to the
    // floor, then rescales once more if the floor added mass.
    void renormalize() {
        const double total = sum(prob_);
        const double inv = 1.0 / total;
        const double shift = std::log(total);
        double h[2] = {0.0, 0.0}, mass[2] = {0.0, 0.0}, best = -1.0;
        std::size_t best_i = 0;
        bool floored = false;
        for (std::size_t i = 0; i < prob_.size(); ++i) {
            double p = prob_[i] * inv;
            double l = log_[i] - shift;
            if (p < kProbabilityFloor) {
                p = kProbabilityFloor;
                l = kLogProbabilityFloor;
                floored = true;
            }
            prob_[i] = p;
            log_[i] = l;
            mass[i & 1] += p;
            h[i & 1] -= p * l;
            if (p > best) {
                best = p;
                best_i = i;
            }
        }
        double entropy = h[0] + h[1];
        if (floored) {
            const double total_mass = mass[0] + mass[1];
            const double rescale = 1.0 / total_mass;
            const double rshift = std::log(total_mass);
            for (std::size_t i = 0; i < prob_.size(); ++i) {
                prob_[i] *= rescale;
                log_[i] -= rshift;
            }
            entropy = entropy / total_mass + rshift;
        }
        entropy_ = std::max(entropy, 0.0);
        argmax_ = best_i;
        dirty_ = false;
    }

    friend bool operator==(const Belief& a, const Belief& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.log_ == b.log_;
    }

private:
    Belief(int rows, int cols)
        : rows_(rows),
          cols_(cols),
          log_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)),
          prob_(log_.size()) {}

    static void check_shape(int rows, int cols) {
        if (rows < 1 || cols < 1) throw ConfigError("belief needs at least one cell");
    }

    static double sum(std::span<const double> v) {
        double acc[4] = {0.0, 0.0, 0.0, 0.0};
        std::size_t i = 0;
        for (; i + 4 <= v.size(); i += 4)
            for (std::size_t j = 0; j < 4; ++j) acc[j] += v[i + j];
        for (; i < v.size(); ++i) acc[0] += v[i];
        return (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }

    void refresh_stats() const {
        double h = 0.0, best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < prob_.size(); ++i) {
            h -= prob_[i] * log_[i];
            if (prob_[i] > best) {
                best = prob_[i];
                best_i = i;
            }
        }
        entropy_ = std::max(h, 0.0);
        argmax_ = best_i;
        dirty_ = false;
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> log_;
    std::vector<double> prob_;
    mutable double entropy_ = 0.0;
    mutable std::size_t argmax_ = 0;
    mutable bool dirty_ = true;
};

struct SummaryEntry {
    Cell cell;
    double probability = 0.0;

    friend bool operator==(const SummaryEntry&, const SummaryEntry&) = default;
};

// Top-k cells of a belief with their raw (not renormalized) probabilities.
struct BeliefSummary {
    std::vector<SummaryEntry> entries;  // descending probability, row-major ties
    double sender_entropy = 0.0;

    friend bool operator==(const BeliefSummary&, const BeliefSummary&) = default;
};

// Uniform prior with i.i.d. uniform log-space jitter in [-scale, +scale].
inline Belief init_uniform_perturbed(const GridConfig& cfg, Rng& rng, double perturb_scale) {
    if (!(perturb_scale >= 0.0)) throw ConfigError("perturb_scale must be >= 0");
    const std::size_t n = cfg.cell_count();
    std::vector<double> logw(n, -std::log(static_cast<double>(n)));
    if (perturb_scale > 0.0)
        for (auto& v : logw) v += rng.uniform(-perturb_scale, perturb_scale);
    if (perturb_scale == 0.0) return Belief::uniform_grid(cfg);
    return Belief::from_log_mass(logw, cfg.side_length, cfg.side_length);
}

inline double entropy(const Belief& b) { return b.entropy(); }

inline void apply_observation_in_place(Belief& b, const Observation& obs, const SensorModel& sm) {
    if (obs.visible_cells.empty()) return;
    for (const Cell& c : obs.visible_cells) {
        const std::size_t i = b.index(c);
        if (obs.target_detected && *obs.target_detected == c)
            b.add_log(i, sm.hit_log_increment);
        else
            b.add_log(i, -sm.miss_log_decrement);
    }
    b.renormalize();
}

inline Belief apply_observation(Belief b, const Observation& obs, const SensorModel& sm) {
    apply_observation_in_place(b, obs, sm);
    return b;
}

// Inverse-entropy weights, capped at w_max. Weight above the cap is handed
// to the uncapped senders in proportion to their raw inverse entropies,
// repeated until nothing exceeds the cap. If every sender ends up capped,
// all weights equal w_max.
inline std::vector<double> fusion_weights(std::span<const double> sender_entropies, double w_max) {
    if (sender_entropies.empty()) throw FusionError("nothing to fuse");
    if (!(w_max > 0.0) || w_max > 1.0) throw ConfigError("w_max must be in (0, 1]");
    const std::size_t m = sender_entropies.size();
    std::vector<double> inv(m);
    for (std::size_t j = 0; j < m; ++j) inv[j] = 1.0 / std::max(sender_entropies[j], kEntropyFloor);

    std::vector<double> w(m, 0.0);
    std::vector<bool> capped(m, false);
    std::size_t n_capped = 0;
    for (;;) {
        const double budget = 1.0 - w_max * static_cast<double>(n_capped);
        double free_inv = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (!capped[j]) free_inv += inv[j];
        bool changed = false;
        for (std::size_t j = 0; j < m; ++j) {
            if (capped[j]) continue;
            w[j] = budget * inv[j] / free_inv;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (!capped[j] && w[j] > w_max) {
                capped[j] = true;
                w[j] = w_max;
                ++n_capped;
                changed = true;
            }
        }
        if (!changed) break;
        if (n_capped == m) {
            std::fill(w.begin(), w.end(), w_max);
            break;
        }
    }
    return w;
}

inline void fuse_weighted_in_place(Belief& b, std::span<const BeliefSummary> summaries, double w_max) {
    if (summaries.empty()) throw FusionError("nothing to fuse");
    std::vector<double> entropies;
    entropies.reserve(summaries.size());
    for (const auto& s : summaries) entropies.push_back(s.sender_entropy);
    const auto w = fusion_weights(entropies, w_max);
    for (std::size_t j = 0; j < summaries.size(); ++j)
        for (const auto& e : summaries[j].entries) b.add_linear(b.index(e.cell), w[j] * e.probability);
    b.renormalize();
}

inline Belief fuse_weighted(Belief b, std::span<const BeliefSummary> summaries, double w_max) {
    fuse_weighted_in_place(b, summaries, w_max);
    return b;
}

// k most probable cells; equal probabilities keep row-major order.
inline BeliefSummary top_k_summary(const Belief& b, std::size_t k_msg) {
    if (k_msg == 0 || k_msg > b.size()) throw ConfigError("k_msg must be in [1, cell count]");
    const auto p = b.probabilities();
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_msg + 1);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (best.size() == k_msg && !(p[i] > best.back().first)) continue;
        auto pos = std::upper_bound(best.begin(), best.end(), p[i],
                                    [](double v, const auto& e) { return v > e.first; });
        best.insert(pos, {p[i], i});
        if (best.size() > k_msg) best.pop_back();
    }
    BeliefSummary s;
    s.sender_entropy = b.entropy();
    s.entries.reserve(best.size());
    for (const auto& [prob, idx] : best) s.entries.push_back({b.cell(idx), prob});
    return s;
}

inline Cell argmax_cell(const Belief& b) { return b.cell(b.argmax_index()); }

}  // namespace herdsim
