#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "herdsim/error.hpp"
#include "herdsim/simulation.hpp"

namespace herdsim {

// Everything a subcommand needs. Loaded from a key = value file and then
// overridden by command-line flags.
struct Settings {
    EpisodeConfig episode;  // base condition
    std::vector<double> loss_rates{0.0, 0.1, 0.3};  // factorial levels
    std::vector<int> latencies{0, 1, 3};
    std::vector<int> coordination_ks{2, 3, 4};
    std::size_t episodes = 200;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::size_t traced_episodes = 20;
    std::string output_dir = "results";
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad value for " + std::string(key) + ": '" + std::string(v) + "'");
    return out;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view v) {
    std::vector<T> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = v.find(',', start);
        out.push_back(parse_number<T>(key, trim(v.substr(start, comma - start))));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

}  // namespace detail

// Applies one key. Keys follow the model's parameter names; p_base,
// latency and k take a comma list, whose first entry also sets the base
// condition.
inline void apply_setting(Settings& s, std::string_view key, std::string_view value) {
    using detail::parse_list;
    using detail::parse_number;
    auto& e = s.episode;
    if (key == "N") e.grid.side_length = parse_number<int>(key, value);
    else if (key == "n") e.grid.agent_count = parse_number<int>(key, value);
    else if (key == "r") e.grid.fov_radius = parse_number<int>(key, value);
    else if (key == "T") e.grid.max_steps = parse_number<int>(key, value);
    else if (key == "k") {
        s.coordination_ks = parse_list<int>(key, value);
        e.grid.coordination_k = s.coordination_ks.front();
    } else if (key == "k_msg") e.protocol.k_msg = parse_number<int>(key, value);
    else if (key == "w_max") e.protocol.w_max = parse_number<double>(key, value);
    else if (key == "theta") e.protocol.theta = parse_number<double>(key, value);
    else if (key == "c1_boost") e.protocol.c1_boost = parse_number<double>(key, value);
    else if (key == "protocol") e.protocol.variant = parse_protocol(value);
    else if (key == "p_base") {
        s.loss_rates = parse_list<double>(key, value);
        e.channel.p_base = s.loss_rates.front();
    } else if (key == "latency" || key == "l") {
        s.latencies = parse_list<int>(key, value);
        e.channel.latency = s.latencies.front();
    } else if (key == "miss_log_decrement") e.sensor.miss_log_decrement = parse_number<double>(key, value);
    else if (key == "hit_log_increment") e.sensor.hit_log_increment = parse_number<double>(key, value);
    else if (key == "epsilon") e.meh.epsilon = parse_number<double>(key, value);
    else if (key == "perturb_scale") e.perturb_scale = parse_number<double>(key, value);
    else if (key == "arrived_keep_moving") e.arrived_keep_moving = detail::parse_bool(key, value);
    else if (key == "episodes") s.episodes = parse_number<std::size_t>(key, value);
    else if (key == "seed") s.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "workers") s.workers = parse_number<unsigned>(key, value);
    else if (key == "traced_episodes") s.traced_episodes = parse_number<std::size_t>(key, value);
    else if (key == "output_dir") s.output_dir = std::string(value);
    else throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

// `key = value` lines; '#' starts a comment; blank lines are skipped.
inline void apply_config(Settings& s, std::istream& in, const std::string& source = "<config>") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = detail::trim(v);
        if (v.empty()) continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
        const auto key = detail::trim(v.substr(0, eq));
        const auto value = detail::trim(v.substr(eq + 1));
        try {
            apply_setting(s, key, value);
        } catch (const ConfigError& err) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + err.what());
        }
    }
}

inline Settings load_config(const std::string& path, Settings s = {}) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open config file");
    apply_config(s, in, path);
    return s;
}

inline void validate(const Settings& s) {
    s.episode.validate();
    if (s.episodes == 0) throw ConfigError("episodes must be positive");
    if (s.workers == 0) throw ConfigError("workers must be positive");
    if (s.loss_rates.empty() || s.latencies.empty() || s.coordination_ks.empty())
        throw ConfigError("factorial levels must be nonempty");
    for (double p : s.loss_rates)
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p_base must be in [0, 1]");
    for (int l : s.latencies)
        if (l < 0) throw ConfigError("latency must be >= 0");
    for (int k : s.coordination_ks)
        if (k < 1 || k > s.episode.grid.agent_count) throw ConfigError("k must be in [1, n]");
}

}  // namespace herdsim
