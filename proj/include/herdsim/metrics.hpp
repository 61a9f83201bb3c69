#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "herdsim/belief.hpp"
#include "herdsim/error.hpp"
#include "herdsim/grid.hpp"
#include "herdsim/protocol.hpp"

namespace herdsim {

namespace detail {

// Sum of the two half-KL terms against the midpoint; swapping p and q
// swaps two addends, so the result is exactly symmetric.
inline double jsd_terms(double p, double lp, double q, double lq) {
    const double m = 0.5 * (p + q);
    const double lm = std::log(m);
    return 0.5 * (p * (lp - lm) + q * (lq - lm));
}

inline double clamp_jsd(double v) { return std::clamp(v, 0.0, std::numbers::ln2); }

}  // namespace detail

// Jensen-Shannon divergence in nats between two probability vectors.
// Entries are floored at kProbabilityFloor, matching belief storage.
inline double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ConfigError("jsd: dimension mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = std::max(p[i], kProbabilityFloor);
        const double b = std::max(q[i], kProbabilityFloor);
        total += detail::jsd_terms(a, std::log(a), b, std::log(b));
    }
    return detail::clamp_jsd(total);
}

inline double jsd(const Belief& p, const Belief& q) {
    if (p.size() != q.size()) throw ConfigError("jsd: dimension mismatch");
    const auto pp = p.probabilities(), qp = q.probabilities();
    const auto pl = p.log_mass(), ql = q.log_mass();
    double total = 0.0;
    for (std::size_t i = 0; i < pp.size(); ++i) total += detail::jsd_terms(pp[i], pl[i], qp[i], ql[i]);
    return detail::clamp_jsd(total);
}

inline double mean_pairwise_jsd(std::span<const Belief* const> beliefs) {
    if (beliefs.size() < 2) throw ConfigError("mean_pairwise_jsd needs at least two beliefs");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < beliefs.size(); ++i)
        for (std::size_t j = i + 1; j < beliefs.size(); ++j) {
            total += jsd(*beliefs[i], *beliefs[j]);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

inline double mean_pairwise_jsd(std::span<const Belief> beliefs) {
    std::vector<const Belief*> ptrs;
    for (const auto& b : beliefs) ptrs.push_back(&b);
    return mean_pairwise_jsd(std::span<const Belief* const>(ptrs));
}

// Mean probability the team assigns to the true target.
inline double mean_alignment(std::span<const Belief* const> beliefs, const Cell& target) {
    if (beliefs.empty()) return 0.0;
    double total = 0.0;
    for (const Belief* b : beliefs) total += b->probability(target);
    return total / static_cast<double>(beliefs.size());
}

inline double mean_alignment(std::span<const Belief> beliefs, const Cell& target) {
    std::vector<const Belief*> ptrs;
    for (const auto& b : beliefs) ptrs.push_back(&b);
    return mean_alignment(std::span<const Belief* const>(ptrs), target);
}

struct MehConfig {
    double epsilon = 0.1;  // nats

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < std::numbers::ln2)) throw ConfigError("epsilon must be in (0, ln 2)");
    }
};

// Per-episode herding flags. The episode counts in the numerator of both
// rates; the rates differ only in their denominators (all episodes vs
// failed episodes).
struct MehClassification {
    bool meh_failed_denominator = false;
    bool meh_all_denominator = false;

    bool herded() const { return meh_all_denominator; }
};

// Malignant herding: the task failed although the team agrees.
inline MehClassification classify_meh(bool success, double final_mean_jsd, const MehConfig& cfg) {
    const bool meh = !success && final_mean_jsd < cfg.epsilon;
    return {meh, meh};
}

inline std::optional<double> alignment_per_byte(double final_mean_alignment, std::size_t bytes) {
    if (bytes == 0) return std::nullopt;
    return final_mean_alignment / static_cast<double>(bytes);
}

struct TimestepRecord {
    Timestep t = 0;
    double mean_pairwise_jsd = 0.0;
    double mean_alignment = 0.0;
    std::vector<double> per_agent_entropy;
    std::vector<Cell> positions;
    std::size_t messages_sent = 0;
    std::size_t messages_dropped = 0;
};

enum class PhaseEventKind : std::uint8_t { observed, transmitted, fused };

// Belief fingerprints taken at phase boundaries, for auditing phase order.
struct PhaseEvent {
    Timestep t = 0;
    AgentId agent = 0;
    PhaseEventKind kind = PhaseEventKind::observed;
    std::uint64_t belief_fingerprint = 0;
};

struct EpisodeTrace {
    std::vector<TimestepRecord> steps;
    std::vector<PhaseEvent> events;
    std::vector<Message> messages;  // every broadcast, before the channel
};

struct EpisodeResult {
    std::uint64_t seed = 0;
    Cell target;
    bool success = false;
    std::optional<Timestep> time_to_success;
    Timestep steps_run = 0;
    double final_jsd = 0.0;
    double final_alignment = 0.0;
    bool meh_failed_denominator = false;
    bool meh_all_denominator = false;
    // Message counts are per-recipient transmissions: one broadcast on a
    // team of n agents is n - 1 messages. Bytes follow the same rule.
    std::size_t broadcasts_sent = 0;
    std::size_t messages_sent = 0;
    std::size_t messages_dropped = 0;
    std::size_t messages_delivered = 0;
    std::size_t messages_undelivered = 0;  // still in flight at termination
    std::size_t bytes_sent = 0;
    std::optional<double> alignment_per_byte;
    std::optional<EpisodeTrace> trace;
};

struct MehRates {
    double all = 0.0;     // herded / all episodes
    double failed = 0.0;  // herded / failed episodes (0 when nothing failed)
};

inline MehRates meh_rates(std::span<const EpisodeResult> episodes) {
    if (episodes.empty()) return {};
    std::size_t herded = 0, failed = 0;
    for (const auto& e : episodes) {
        herded += e.meh_all_denominator ? 1 : 0;
        failed += e.success ? 0 : 1;
    }
    MehRates r;
    r.all = static_cast<double>(herded) / static_cast<double>(episodes.size());
    r.failed = failed ? static_cast<double>(herded) / static_cast<double>(failed) : 0.0;
    return r;
}

}  // namespace herdsim
