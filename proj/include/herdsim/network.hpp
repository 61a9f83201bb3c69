#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "herdsim/error.hpp"
#include "herdsim/protocol.hpp"
#include "herdsim/rng.hpp"

namespace herdsim {

struct ChannelConfig {
    double p_base = 0.0;  // base per-message loss probability
    int latency = 0;      // delivery delay in steps

    void validate() const {
        if (!(p_base >= 0.0 && p_base <= 1.0)) throw ConfigError("p_base must be in [0, 1]");
        if (latency < 0) throw ConfigError("latency must be >= 0");
    }
};

// Congestion-dependent loss: 1 - (1 - p_base)^n for n simultaneous senders.
inline double drop_probability(double p_base, std::size_t concurrent_senders) {
    if (!(p_base >= 0.0 && p_base <= 1.0)) throw ConfigError("p_base must be in [0, 1]");
    return 1.0 - std::pow(1.0 - p_base, static_cast<double>(concurrent_senders));
}

struct InFlight {
    Timestep deliver_at = 0;
    std::uint64_t sequence = 0;  // enqueue order
    Message message;
    std::vector<AgentId> recipients;
};

// Fully connected broadcast medium. A message is dropped for everyone or
// delivered to every agent except its sender.
class Channel {
public:
    Channel(ChannelConfig cfg, int agent_count) : cfg_(cfg), agent_count_(agent_count) {
        cfg_.validate();
        if (agent_count < 1) throw ConfigError("agent_count must be positive");
    }

    // Every message in `msgs` must have been sent at step t. Returns the
    // number of broadcasts dropped.
    std::size_t broadcast(std::vector<Message> msgs, Timestep t, Rng& rng) {
        if (msgs.empty()) return 0;
        const double p_drop = drop_probability(cfg_.p_base, msgs.size());
        std::size_t dropped = 0;
        for (auto& m : msgs) {
            if (m.sent_at != t) throw ConfigError("broadcast message sent_at differs from current step");
            if (rng.bernoulli(p_drop)) {
                ++dropped;
                continue;
            }
            InFlight entry;
            entry.deliver_at = t + static_cast<Timestep>(cfg_.latency);
            entry.sequence = next_sequence_++;
            entry.recipients.reserve(static_cast<std::size_t>(agent_count_ - 1));
            for (int a = 0; a < agent_count_; ++a)
                if (static_cast<AgentId>(a) != m.sender) entry.recipients.push_back(static_cast<AgentId>(a));
            entry.message = std::move(m);
            queue_.push_back(std::move(entry));
        }
        return dropped;
    }

    // Removes everything due at t, grouped by recipient, ordered by sender
    // id and then enqueue order.
    std::vector<std::vector<Message>> deliver(Timestep t) {
        std::vector<std::vector<Message>> inbox(static_cast<std::size_t>(agent_count_));
        std::vector<InFlight> due;
        while (!queue_.empty() && queue_.front().deliver_at <= t) {
            due.push_back(std::move(queue_.front()));
            queue_.pop_front();
        }
        std::stable_sort(due.begin(), due.end(), [](const InFlight& a, const InFlight& b) {
            if (a.message.sender != b.message.sender) return a.message.sender < b.message.sender;
            return a.sequence < b.sequence;
        });
        for (auto& e : due) {
            for (AgentId r : e.recipients) inbox[r].push_back(e.message);
            delivered_ += e.recipients.size();
        }
        return inbox;
    }

    const std::deque<InFlight>& in_flight() const { return queue_; }
    // Per-recipient copies handed out so far.
    std::size_t delivered_count() const { return delivered_; }
    // Per-recipient copies still queued.
    std::size_t undelivered_count() const {
        std::size_t n = 0;
        for (const auto& e : queue_) n += e.recipients.size();
        return n;
    }
    std::size_t recipients_per_message() const { return static_cast<std::size_t>(agent_count_ - 1); }
    const ChannelConfig& config() const { return cfg_; }

private:
    ChannelConfig cfg_;
    int agent_count_;
    std::deque<InFlight> queue_;
    std::uint64_t next_sequence_ = 0;
    std::size_t delivered_ = 0;
};

}  // namespace herdsim
