#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "herdsim/belief.hpp"
#include "herdsim/error.hpp"

namespace herdsim {

enum class Protocol : std::uint8_t {
    silent = 0,     // C0: no communication
    semantic = 1,   // C1: argmax cell + entropy, every step
    epistemic = 2,  // C2: top-k summary + entropy, every step
    gated = 3,      // C3: as C2, sent only when |dH| >= theta
};

inline constexpr std::array<Protocol, 4> kAllProtocols = {Protocol::silent, Protocol::semantic,
                                                          Protocol::epistemic, Protocol::gated};

inline std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::silent: return "C0";
        case Protocol::semantic: return "C1";
        case Protocol::epistemic: return "C2";
        case Protocol::gated: return "C3";
    }
    return "?";
}

inline Protocol parse_protocol(std::string_view s) {
    if (s == "C0" || s == "c0" || s == "none" || s == "silent") return Protocol::silent;
    if (s == "C1" || s == "c1" || s == "semantic") return Protocol::semantic;
    if (s == "C2" || s == "c2" || s == "epistemic") return Protocol::epistemic;
    if (s == "C3" || s == "c3" || s == "gated") return Protocol::gated;
    throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

struct ProtocolConfig {
    Protocol variant = Protocol::gated;
    double theta = 0.20;    // nats, entropy-delta gate (C3)
    int k_msg = 5;          // cells per summary (C2, C3)
    double w_max = 0.8;     // per-sender fusion weight cap (C2, C3)
    double c1_boost = 1.0;  // nats at zero sender entropy (C1)

    bool uses_summaries() const { return variant == Protocol::epistemic || variant == Protocol::gated; }

    void validate() const {
        if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be >= 0");
        if (k_msg < 1 || k_msg > 255) throw ConfigError("k_msg must be in [1, 255]");
        if (!(w_max > 0.0) || w_max > 1.0) throw ConfigError("w_max must be in (0, 1]");
        if (!(c1_boost > 0.0) || !std::isfinite(c1_boost)) throw ConfigError("c1_boost must be positive");
    }
};

// Accounted payload sizes: sender id (1 byte), cell index (2 bytes) and
// 4-byte floats for entropy and probabilities. 7 bytes for a semantic
// message, 35 for a five-cell summary.
inline constexpr std::size_t kSemanticMessageBytes = 1 + 2 + 4;
inline constexpr std::size_t epistemic_message_bytes(std::size_t k_msg) { return 1 + 6 * k_msg + 4; }
inline constexpr std::size_t kEpistemicMessageBytes = epistemic_message_bytes(5);

struct SemanticPayload {
    Cell argmax;
    double entropy = 0.0;

    friend bool operator==(const SemanticPayload&, const SemanticPayload&) = default;
};

struct EpistemicPayload {
    BeliefSummary summary;

    friend bool operator==(const EpistemicPayload&, const EpistemicPayload&) = default;
};

struct Message {
    AgentId sender = 0;
    Timestep sent_at = 0;
    std::variant<SemanticPayload, EpistemicPayload> payload;
    std::size_t size_bytes = 0;

    bool is_semantic() const { return std::holds_alternative<SemanticPayload>(payload); }

    friend bool operator==(const Message&, const Message&) = default;
};

// Gate memory for C3. Starts at the prior's entropy, so the first send
// needs a real entropy change of at least theta.
struct TransmitState {
    double entropy_at_last_tx = 0.0;
    bool has_transmitted = false;

    static TransmitState initial(double initial_entropy) { return {initial_entropy, false}; }

    void record(double current_entropy) {
        entropy_at_last_tx = current_entropy;
        has_transmitted = true;
    }
};

inline bool should_transmit(const ProtocolConfig& cfg, double current_entropy, const TransmitState& tx) {
    switch (cfg.variant) {
        case Protocol::silent: return false;
        case Protocol::semantic:
        case Protocol::epistemic: return true;
        case Protocol::gated: return std::abs(current_entropy - tx.entropy_at_last_tx) >= cfg.theta;
    }
    return false;
}

inline Message encode_message(const ProtocolConfig& cfg, const Belief& b, AgentId sender, Timestep t) {
    Message m;
    m.sender = sender;
    m.sent_at = t;
    switch (cfg.variant) {
        case Protocol::silent:
            throw ProtocolViolation("C0 does not transmit");
        case Protocol::semantic:
            m.payload = SemanticPayload{argmax_cell(b), b.entropy()};
            m.size_bytes = kSemanticMessageBytes;
            break;
        case Protocol::epistemic:
        case Protocol::gated:
            m.payload = EpistemicPayload{top_k_summary(b, static_cast<std::size_t>(cfg.k_msg))};
            m.size_bytes = epistemic_message_bytes(static_cast<std::size_t>(cfg.k_msg));
            break;
    }
    return m;
}

// Log-mass boost C1 applies to a reported argmax cell.
inline double semantic_boost(double c1_boost, double sender_entropy) {
    return c1_boost / (1.0 + std::max(sender_entropy, 0.0));
}

inline void apply_incoming_in_place(const ProtocolConfig& cfg, Belief& b, std::span<const Message> msgs) {
    if (msgs.empty()) return;
    if (cfg.variant == Protocol::silent) throw ProtocolViolation("C0 receives no messages");
    const bool semantic = msgs.front().is_semantic();
    for (const auto& m : msgs)
        if (m.is_semantic() != semantic) throw MalformedMessage("mixed semantic/epistemic batch");
    if (semantic != (cfg.variant == Protocol::semantic))
        throw MalformedMessage("payload kind does not match the protocol");

    if (semantic) {
        for (const auto& m : msgs) {
            const auto& p = std::get<SemanticPayload>(m.payload);
            b.add_log(b.index(p.argmax), semantic_boost(cfg.c1_boost, p.entropy));
        }
        b.renormalize();
        return;
    }
    std::vector<BeliefSummary> summaries;
    summaries.reserve(msgs.size());
    for (const auto& m : msgs) summaries.push_back(std::get<EpistemicPayload>(m.payload).summary);
    fuse_weighted_in_place(b, summaries, cfg.w_max);
}

inline Belief apply_incoming(const ProtocolConfig& cfg, Belief b, std::span<const Message> msgs) {
    apply_incoming_in_place(cfg, b, msgs);
    return b;
}

// Replay-log layout, little-endian:
//   sender u8 | sent_at u16 | kind u8 (1 = semantic, 2 = epistemic) | payload
//   semantic:  cell u16 | entropy f64
//   epistemic: count u8 | count x (cell u16 | probability f64) | entropy f64
// Cells are row-major indices on a grid of `cols` columns. Doubles are
// written at full width so a replayed log reproduces the run bit-for-bit.
namespace wire {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint64_t v) { out.push_back(static_cast<std::uint8_t>(v)); }

inline void put_u16(std::vector<std::uint8_t>& out, std::uint64_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t u8() { return take(1); }
    std::uint64_t u16() { return take(2); }
    double f64() { return std::bit_cast<double>(take(8)); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::uint64_t take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw MalformedMessage("truncated message record");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace wire

inline std::vector<std::uint8_t> serialize(const Message& m, int cols) {
    if (m.sender > 0xff) throw MalformedMessage("sender id does not fit in u8");
    if (m.sent_at > 0xffff) throw MalformedMessage("timestep does not fit in u16");
    std::vector<std::uint8_t> out;
    wire::put_u8(out, m.sender);
    wire::put_u16(out, m.sent_at);
    if (const auto* s = std::get_if<SemanticPayload>(&m.payload)) {
        wire::put_u8(out, 1);
        wire::put_u16(out, cell_index(s->argmax, cols));
        wire::put_f64(out, s->entropy);
    } else {
        const auto& sum = std::get<EpistemicPayload>(m.payload).summary;
        if (sum.entries.size() > 0xff) throw MalformedMessage("summary too long");
        wire::put_u8(out, 2);
        wire::put_u8(out, sum.entries.size());
        for (const auto& e : sum.entries) {
            wire::put_u16(out, cell_index(e.cell, cols));
            wire::put_f64(out, e.probability);
        }
        wire::put_f64(out, sum.sender_entropy);
    }
    return out;
}

inline Message deserialize(std::span<const std::uint8_t> bytes, int cols) {
    wire::Reader in(bytes);
    Message m;
    m.sender = static_cast<AgentId>(in.u8());
    m.sent_at = static_cast<Timestep>(in.u16());
    const auto kind = in.u8();
    if (kind == 1) {
        SemanticPayload s;
        s.argmax = cell_at(in.u16(), cols);
        s.entropy = in.f64();
        m.payload = s;
        m.size_bytes = kSemanticMessageBytes;
    } else if (kind == 2) {
        EpistemicPayload e;
        const auto count = in.u8();
        for (std::uint64_t i = 0; i < count; ++i) {
            SummaryEntry entry;
            entry.cell = cell_at(in.u16(), cols);
            entry.probability = in.f64();
            e.summary.entries.push_back(entry);
        }
        e.summary.sender_entropy = in.f64();
        m.size_bytes = epistemic_message_bytes(count);
        m.payload = std::move(e);
    } else {
        throw MalformedMessage("unknown payload kind " + std::to_string(kind));
    }
    if (!in.done()) throw MalformedMessage("trailing bytes after message record");
    return m;
}

// Message log file: each record is its serialized length as u16 followed
// by the serialized message.
inline void write_message_log(std::ostream& out, std::span<const Message> msgs, int cols) {
    for (const auto& m : msgs) {
        const auto bytes = serialize(m, cols);
        std::vector<std::uint8_t> len;
        wire::put_u16(len, bytes.size());
        out.write(reinterpret_cast<const char*>(len.data()), 2);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

inline std::vector<Message> read_message_log(std::istream& in, int cols) {
    std::vector<Message> out;
    unsigned char len[2];
    while (in.read(reinterpret_cast<char*>(len), 2)) {
        const std::size_t n = static_cast<std::size_t>(len[0]) | (static_cast<std::size_t>(len[1]) << 8);
        std::vector<std::uint8_t> buf(n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n)))
            throw MalformedMessage("truncated message log");
        out.push_back(deserialize(buf, cols));
    }
    if (in.gcount() != 0) throw MalformedMessage("truncated message log");
    return out;
}

}  // namespace herdsim
