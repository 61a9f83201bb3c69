#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "herdsim/belief.hpp"
#include "herdsim/grid.hpp"
#include "herdsim/metrics.hpp"
#include "herdsim/network.hpp"
#include "herdsim/protocol.hpp"
#include "herdsim/rng.hpp"

namespace herdsim {

struct EpisodeConfig {
    GridConfig grid;
    ProtocolConfig protocol;
    ChannelConfig channel;
    SensorModel sensor;
    MehConfig meh;
    std::uint64_t seed = 0;
    bool record_trace = false;
    double perturb_scale = 1e-3;
    // Agents that reached the target normally hold position.
    bool arrived_keep_moving = false;

    void validate() const {
        grid.validate();
        protocol.validate();
        channel.validate();
        sensor.validate();
        meh.validate();
        if (static_cast<std::size_t>(protocol.k_msg) > grid.cell_count())
            throw ConfigError("k_msg exceeds the number of cells");
        if (!(perturb_scale >= 0.0)) throw ConfigError("perturb_scale must be >= 0");
    }
};

struct AgentState {
    AgentId id = 0;
    Cell position;
    Belief belief;
    TransmitState tx;
    bool arrived = false;
};

// FNV-1a over the raw log-mass bytes.
inline std::uint64_t fingerprint(const Belief& b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : b.log_mass()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// One synchronous episode. Each step runs, over all agents per phase:
// observe, transmit, broadcast, deliver, fuse, move, then the success
// check. The phases are public so tests can drive them out of order.
class Episode {
public:
    explicit Episode(EpisodeConfig cfg)
        : cfg_((cfg.validate(), std::move(cfg))),
          channel_(cfg_.channel, cfg_.grid.agent_count),
          channel_rng_(make_stream(cfg_.seed, Stream::channel)) {
        Rng target_rng = make_stream(cfg_.seed, Stream::target);
        target_ = place_target(cfg_.grid, target_rng);
        const auto starts = start_positions(cfg_.grid);
        agents_.reserve(starts.size());
        for (std::size_t i = 0; i < starts.size(); ++i) {
            Rng prng = make_stream(cfg_.seed, Stream::perturbation, i);
            AgentState a;
            a.id = static_cast<AgentId>(i);
            a.position = starts[i];
            a.belief = init_uniform_perturbed(cfg_.grid, prng, cfg_.perturb_scale);
            a.tx = TransmitState::initial(a.belief.entropy());
            agents_.push_back(std::move(a));
            tie_rngs_.push_back(make_stream(cfg_.seed, Stream::tie_break, i));
        }
        inboxes_.resize(agents_.size());
        if (cfg_.record_trace) trace_.emplace();
    }

    void begin_step() {
        ++t_;
        step_sent_ = 0;
        step_dropped_ = 0;
        outbox_.clear();
    }

    void observe_phase() {
        for (auto& a : agents_) {
            apply_observation_in_place(a.belief, observe(a.position, target_, cfg_.grid), cfg_.sensor);
            log_event(a, PhaseEventKind::observed);
        }
    }

    void transmit_phase() {
        if (cfg_.protocol.variant == Protocol::silent) return;
        const std::size_t fanout = channel_.recipients_per_message();
        for (auto& a : agents_) {
            const double h = a.belief.entropy();
            if (!should_transmit(cfg_.protocol, h, a.tx)) continue;
            outbox_.push_back(encode_message(cfg_.protocol, a.belief, a.id, t_));
            a.tx.record(h);
            if (trace_) trace_->messages.push_back(outbox_.back());
            bytes_sent_ += outbox_.back().size_bytes * fanout;
            log_event(a, PhaseEventKind::transmitted);
        }
        broadcasts_sent_ += outbox_.size();
        step_sent_ = outbox_.size() * fanout;
        messages_sent_ += step_sent_;
        step_dropped_ = channel_.broadcast(std::move(outbox_), t_, channel_rng_) * fanout;
        messages_dropped_ += step_dropped_;
        outbox_.clear();
    }

    void deliver_and_fuse_phase() {
        inboxes_ = channel_.deliver(t_);
        for (auto& a : agents_) {
            auto& inbox = inboxes_[a.id];
            if (inbox.empty()) continue;
            apply_incoming_in_place(cfg_.protocol, a.belief, inbox);
            log_event(a, PhaseEventKind::fused);
        }
    }

    void move_phase() {
        for (auto& a : agents_) {
            if (!a.arrived || cfg_.arrived_keep_moving)
                a.position = step_toward(a.position, argmax_cell(a.belief), tie_rngs_[a.id]);
            if (a.position == target_) a.arrived = true;
        }
    }

    // Returns true once the episode is over.
    bool end_step() {
        std::size_t arrived = 0;
        for (const auto& a : agents_) arrived += a.arrived ? 1 : 0;
        if (arrived >= static_cast<std::size_t>(cfg_.grid.coordination_k)) success_at_ = t_;
        if (trace_) record_step();
        return success_at_.has_value() || t_ >= static_cast<Timestep>(cfg_.grid.max_steps);
    }

    bool step() {
        begin_step();
        observe_phase();
        transmit_phase();
        deliver_and_fuse_phase();
        move_phase();
        return end_step();
    }

    EpisodeResult finish() {
        EpisodeResult r;
        r.seed = cfg_.seed;
        r.target = target_;
        r.steps_run = t_;
        r.success = success_at_.has_value();
        r.time_to_success = success_at_;
        r.final_jsd = agents_.size() >= 2 ? mean_pairwise_jsd(belief_ptrs()) : 0.0;
        r.final_alignment = mean_alignment(belief_ptrs(), target_);
        r.broadcasts_sent = broadcasts_sent_;
        r.messages_sent = messages_sent_;
        r.messages_dropped = messages_dropped_;
        r.messages_delivered = channel_.delivered_count();
        // Herding needs communication: a team that never received a
        // message is never flagged, however similar its beliefs.
        if (r.messages_delivered > 0) {
            const auto meh = classify_meh(r.success, r.final_jsd, cfg_.meh);
            r.meh_failed_denominator = meh.meh_failed_denominator;
            r.meh_all_denominator = meh.meh_all_denominator;
        }
        r.messages_undelivered = channel_.undelivered_count();
        r.bytes_sent = bytes_sent_;
        r.alignment_per_byte = alignment_per_byte(r.final_alignment, bytes_sent_);
        r.trace = std::move(trace_);
        return r;
    }

    const EpisodeConfig& config() const { return cfg_; }
    const std::vector<AgentState>& agents() const { return agents_; }
    const Cell& target() const { return target_; }
    Timestep current_step() const { return t_; }
    const Channel& channel() const { return channel_; }

private:
    std::vector<const Belief*> belief_ptrs() const {
        std::vector<const Belief*> out;
        out.reserve(agents_.size());
        for (const auto& a : agents_) out.push_back(&a.belief);
        return out;
    }

    void log_event(const AgentState& a, PhaseEventKind kind) {
        if (!trace_) return;
        trace_->events.push_back(PhaseEvent{t_, a.id, kind, fingerprint(a.belief)});
    }

    void record_step() {
        TimestepRecord rec;
        rec.t = t_;
        const auto ptrs = belief_ptrs();
        rec.mean_pairwise_jsd = ptrs.size() >= 2 ? mean_pairwise_jsd(ptrs) : 0.0;
        rec.mean_alignment = mean_alignment(ptrs, target_);
        for (const auto& a : agents_) {
            rec.per_agent_entropy.push_back(a.belief.entropy());
            rec.positions.push_back(a.position);
        }
        rec.messages_sent = step_sent_;
        rec.messages_dropped = step_dropped_;
        trace_->steps.push_back(std::move(rec));
    }

    EpisodeConfig cfg_;
    Channel channel_;
    Rng channel_rng_;
    std::vector<Rng> tie_rngs_;
    std::vector<AgentState> agents_;
    std::vector<std::vector<Message>> inboxes_;
    std::vector<Message> outbox_;
    Cell target_;
    Timestep t_ = 0;
    std::optional<Timestep> success_at_;
    std::size_t broadcasts_sent_ = 0;
    std::size_t messages_sent_ = 0;
    std::size_t messages_dropped_ = 0;
    std::size_t bytes_sent_ = 0;
    std::size_t step_sent_ = 0;
    std::size_t step_dropped_ = 0;
    std::optional<EpisodeTrace> trace_;
};

inline EpisodeResult run_episode(const EpisodeConfig& cfg) {
    Episode ep(cfg);
    while (!ep.step()) {
    }
    return ep.finish();
}

struct PhaseAudit {
    bool ok = true;
    std::optional<std::pair<AgentId, Timestep>> violation;
};

// Every transmission at step t must encode exactly the belief the sender
// held right after its own step-t observation, i.e. no step-t fusion
// leaked into it. Episodes without transmissions pass vacuously.
inline PhaseAudit phase_order_audit(const EpisodeTrace& trace) {
    std::map<std::pair<Timestep, AgentId>, std::uint64_t> observed;
    for (const auto& e : trace.events)
        if (e.kind == PhaseEventKind::observed) observed[{e.t, e.agent}] = e.belief_fingerprint;
    for (const auto& e : trace.events) {
        if (e.kind != PhaseEventKind::transmitted) continue;
        const auto it = observed.find({e.t, e.agent});
        if (it == observed.end() || it->second != e.belief_fingerprint)
            return {false, std::make_pair(e.agent, e.t)};
    }
    return {};
}

// One row per step:
//   t,messages_sent,messages_dropped,mean_jsd,mean_alignment,
//   then per agent i: agent<i>_row,agent<i>_col,agent<i>_entropy
inline void write_trace_csv(std::ostream& out, const EpisodeTrace& trace, int agent_count) {
    out << "t,messages_sent,messages_dropped,mean_jsd,mean_alignment";
    for (int i = 0; i < agent_count; ++i)
        out << ",agent" << i << "_row,agent" << i << "_col,agent" << i << "_entropy";
    out << '\n';
    out.precision(17);
    for (const auto& s : trace.steps) {
        out << s.t << ',' << s.messages_sent << ',' << s.messages_dropped << ',' << s.mean_pairwise_jsd << ','
            << s.mean_alignment;
        for (std::size_t i = 0; i < s.positions.size(); ++i)
            out << ',' << s.positions[i].row << ',' << s.positions[i].col << ',' << s.per_agent_entropy[i];
        out << '\n';
    }
}

}  // namespace herdsim
