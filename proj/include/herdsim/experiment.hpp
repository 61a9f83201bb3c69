#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "herdsim/metrics.hpp"
#include "herdsim/simulation.hpp"
#include "herdsim/stats.hpp"

namespace herdsim {

struct ConditionKey {
    Protocol protocol = Protocol::silent;
    double p_base = 0.0;
    int latency = 0;
    int k = 3;
    int side = 50;
    int steps = 200;
    double theta = 0.2;

    static ConditionKey of(const EpisodeConfig& c) {
        return {c.protocol.variant, c.channel.p_base, c.channel.latency, c.grid.coordination_k,
                c.grid.side_length, c.grid.max_steps, c.protocol.theta};
    }

    friend bool operator==(const ConditionKey&, const ConditionKey&) = default;
};

inline std::string label(const ConditionKey& k) {
    std::ostringstream os;
    os << to_string(k.protocol) << " p_base=" << k.p_base << " latency=" << k.latency << " k=" << k.k
       << " N=" << k.side << " T=" << k.steps;
    if (k.protocol == Protocol::gated) os << " theta=" << k.theta;
    return os.str();
}

// Per-step team means over the traced episodes of one condition, split by
// outcome. An episode that ended early holds its final value.
struct OutcomeSeries {
    std::vector<double> jsd_success, jsd_failure;
    std::vector<double> alignment_success, alignment_failure;
    std::size_t success_episodes = 0;
    std::size_t failure_episodes = 0;
};

struct ConditionSummary {
    ConditionKey key;
    std::size_t episodes = 0;
    std::size_t successes = 0;
    std::size_t meh_episodes = 0;
    double success_rate = 0.0;
    std::optional<double> tts_mean;  // successful episodes only
    std::optional<double> tts_sd;
    double final_jsd_mean = 0.0, final_jsd_sd = 0.0;
    double final_alignment_mean = 0.0, final_alignment_sd = 0.0;
    double meh_rate_all = 0.0;
    double meh_rate_failed = 0.0;  // 0 when no episode failed
    double msgs_mean = 0.0;
    double bytes_mean = 0.0;
    std::optional<double> apb_mean;   // mean of per-episode values, episodes with bytes > 0
    std::optional<double> apb_ratio;  // final_alignment_mean / bytes_mean
    std::size_t audited_episodes = 0;
    std::size_t audit_failures = 0;
    std::size_t conservation_failures = 0;

    std::size_t failures() const { return episodes - successes; }
};

inline ConditionSummary summarize(const ConditionKey& key, std::span<const EpisodeResult> eps) {
    ConditionSummary s;
    s.key = key;
    s.episodes = eps.size();
    if (eps.empty()) return s;
    std::vector<double> tts, jsd, align, apb;
    double msgs = 0.0, bytes = 0.0;
    for (const auto& e : eps) {
        if (e.success) {
            ++s.successes;
            tts.push_back(static_cast<double>(*e.time_to_success));
        }
        if (e.meh_all_denominator) ++s.meh_episodes;
        jsd.push_back(e.final_jsd);
        align.push_back(e.final_alignment);
        if (e.alignment_per_byte) apb.push_back(*e.alignment_per_byte);
        msgs += static_cast<double>(e.messages_sent);
        bytes += static_cast<double>(e.bytes_sent);
        if (e.messages_sent != e.messages_delivered + e.messages_dropped + e.messages_undelivered)
            ++s.conservation_failures;
    }
    const double n = static_cast<double>(eps.size());
    s.success_rate = static_cast<double>(s.successes) / n;
    if (!tts.empty()) {
        const auto m = mean_sd(tts);
        s.tts_mean = m.mean;
        s.tts_sd = m.sd;
    }
    const auto mj = mean_sd(jsd), ma = mean_sd(align);
    s.final_jsd_mean = mj.mean;
    s.final_jsd_sd = mj.sd;
    s.final_alignment_mean = ma.mean;
    s.final_alignment_sd = ma.sd;
    const auto rates = meh_rates(eps);
    s.meh_rate_all = rates.all;
    s.meh_rate_failed = rates.failed;
    s.msgs_mean = msgs / n;
    s.bytes_mean = bytes / n;
    if (!apb.empty()) s.apb_mean = mean_sd(apb).mean;
    if (s.bytes_mean > 0.0) s.apb_ratio = s.final_alignment_mean / s.bytes_mean;
    return s;
}

// One condition to run: a template config and the seed group its
// episodes draw from. Conditions sharing a group see identical targets,
// priors and tie-break streams.
struct ConditionSpec {
    EpisodeConfig config;
    std::uint64_t seed_group = 0;
};

struct RunOptions {
    std::size_t episodes = 200;
    std::uint64_t base_seed = 1;
    unsigned workers = 1;
    // The first `traced_episodes` episodes of each condition record a
    // trace; those are phase-audited and feed the outcome series.
    std::size_t traced_episodes = 0;
};

struct ConditionRun {
    ConditionKey key;
    EpisodeConfig config;  // template; seed unset
    std::uint64_t seed_group = 0;
    std::vector<EpisodeResult> episodes;  // without traces
    ConditionSummary summary;
    std::optional<OutcomeSeries> series;
};

// Runs f(0..n-1) on `workers` threads. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    pool.reserve(count);
    for (unsigned w = 0; w < count; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace detail {

// Per-step team means of one traced episode, padded to max_steps with the
// final value.
struct EpisodeSeries {
    std::vector<double> jsd, alignment;
};

inline EpisodeSeries episode_series(const EpisodeTrace& trace, int max_steps) {
    EpisodeSeries s;
    const auto len = static_cast<std::size_t>(max_steps);
    if (trace.steps.empty()) return s;
    s.jsd.resize(len);
    s.alignment.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
        const auto& rec = trace.steps[std::min(t, trace.steps.size() - 1)];
        s.jsd[t] = rec.mean_pairwise_jsd;
        s.alignment[t] = rec.mean_alignment;
    }
    return s;
}

inline OutcomeSeries outcome_series(std::span<const EpisodeResult> eps, std::span<const EpisodeSeries> per_episode,
                                    int max_steps) {
    OutcomeSeries s;
    const auto len = static_cast<std::size_t>(max_steps);
    s.jsd_success.assign(len, 0.0);
    s.jsd_failure.assign(len, 0.0);
    s.alignment_success.assign(len, 0.0);
    s.alignment_failure.assign(len, 0.0);
    for (std::size_t i = 0; i < per_episode.size(); ++i) {
        const auto& ep = per_episode[i];
        if (ep.jsd.empty()) continue;
        const bool ok = eps[i].success;
        auto& jsd = ok ? s.jsd_success : s.jsd_failure;
        auto& align = ok ? s.alignment_success : s.alignment_failure;
        (ok ? s.success_episodes : s.failure_episodes) += 1;
        for (std::size_t t = 0; t < len; ++t) {
            jsd[t] += ep.jsd[t];
            align[t] += ep.alignment[t];
        }
    }
    auto scale = [](std::vector<double>& v, std::size_t n) {
        if (n == 0) return;
        for (auto& x : v) x /= static_cast<double>(n);
    };
    scale(s.jsd_success, s.success_episodes);
    scale(s.alignment_success, s.success_episodes);
    scale(s.jsd_failure, s.failure_episodes);
    scale(s.alignment_failure, s.failure_episodes);
    return s;
}

}  // namespace detail

// Runs every (condition, episode) pair, possibly in parallel. Each result
// lands in a fixed slot, so output does not depend on the worker count.
inline std::vector<ConditionRun> run_conditions(std::span<const ConditionSpec> specs, const RunOptions& opt) {
    for (const auto& s : specs) s.config.validate();
    std::vector<ConditionRun> runs(specs.size());
    for (std::size_t c = 0; c < specs.size(); ++c) {
        runs[c].key = ConditionKey::of(specs[c].config);
        runs[c].config = specs[c].config;
        runs[c].seed_group = specs[c].seed_group;
        runs[c].episodes.resize(opt.episodes);
    }
    const std::size_t traced = std::min(opt.traced_episodes, opt.episodes);
    std::vector<char> audit_ok(specs.size() * traced, 1);
    std::vector<detail::EpisodeSeries> series(specs.size() * traced);
    parallel_for(specs.size() * opt.episodes, opt.workers, [&](std::size_t job) {
        const std::size_t c = job / opt.episodes, e = job % opt.episodes;
        EpisodeConfig cfg = specs[c].config;
        cfg.seed = derive_episode_seed(opt.base_seed, specs[c].seed_group, e);
        cfg.record_trace = e < traced;
        auto r = run_episode(cfg);
        if (r.trace) {
            audit_ok[c * traced + e] = phase_order_audit(*r.trace).ok ? 1 : 0;
            series[c * traced + e] = detail::episode_series(*r.trace, cfg.grid.max_steps);
            r.trace.reset();
        }
        runs[c].episodes[e] = std::move(r);
    });
    for (std::size_t c = 0; c < runs.size(); ++c) {
        auto& run = runs[c];
        run.summary = summarize(run.key, run.episodes);
        run.summary.audited_episodes = traced;
        for (std::size_t e = 0; e < traced; ++e)
            if (!audit_ok[c * traced + e]) ++run.summary.audit_failures;
        if (traced > 0)
            run.series = detail::outcome_series(
                std::span(run.episodes).first(traced),
                std::span<const detail::EpisodeSeries>(series).subspan(c * traced, traced), run.config.grid.max_steps);
    }
    return runs;
}

// Seed groups for the sweeps. The factorial design uses the condition
// index instead, so every factorial condition gets its own episodes.
inline constexpr std::uint64_t kComparisonSeedGroup = 0x10000;
inline constexpr std::uint64_t kThetaSweepSeedGroup = 0x20000;
inline constexpr std::uint64_t kScalingSeedGroup = 0x30000;  // + grid index

// All four protocols on identical seeds.
inline std::vector<ConditionRun> compare_protocols(const EpisodeConfig& base, const RunOptions& opt,
                                                   std::uint64_t seed_group = kComparisonSeedGroup) {
    std::vector<ConditionSpec> specs;
    for (auto p : kAllProtocols) {
        ConditionSpec s{base, seed_group};
        s.config.protocol.variant = p;
        specs.push_back(s);
    }
    return run_conditions(specs, opt);
}

struct FactorialDesign {
    std::vector<Protocol> protocols{kAllProtocols.begin(), kAllProtocols.end()};
    std::vector<double> loss_rates{0.0, 0.1, 0.3};
    std::vector<int> latencies{0, 1, 3};
    std::vector<int> coordination_ks{2, 3, 4};
    EpisodeConfig base;

    std::size_t condition_count() const {
        return protocols.size() * loss_rates.size() * latencies.size() * coordination_ks.size();
    }

    // Ordered by k, then loss rate, then latency, then protocol. The seed
    // group is the condition index.
    std::vector<ConditionSpec> conditions() const {
        std::vector<ConditionSpec> out;
        out.reserve(condition_count());
        for (int k : coordination_ks)
            for (double p : loss_rates)
                for (int l : latencies)
                    for (auto proto : protocols) {
                        ConditionSpec s{base, static_cast<std::uint64_t>(out.size())};
                        s.config.grid.coordination_k = k;
                        s.config.channel.p_base = p;
                        s.config.channel.latency = l;
                        s.config.protocol.variant = proto;
                        out.push_back(s);
                    }
        return out;
    }
};

inline std::vector<ConditionRun> run_factorial(const FactorialDesign& design, const RunOptions& opt) {
    const auto specs = design.conditions();
    return run_conditions(specs, opt);
}

inline std::vector<double> default_thetas() { return {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40}; }

struct ThetaSweepResult {
    std::vector<ConditionRun> rows;  // C3, one per theta
    ConditionRun c2_reference;       // same seeds
};

inline ThetaSweepResult theta_sweep(const EpisodeConfig& base, std::span<const double> thetas, const RunOptions& opt) {
    std::vector<ConditionSpec> specs;
    for (double th : thetas) {
        ConditionSpec s{base, kThetaSweepSeedGroup};
        s.config.protocol.variant = Protocol::gated;
        s.config.protocol.theta = th;
        specs.push_back(s);
    }
    ConditionSpec ref{base, kThetaSweepSeedGroup};
    ref.config.protocol.variant = Protocol::epistemic;
    specs.push_back(ref);
    auto runs = run_conditions(specs, opt);
    ThetaSweepResult out;
    out.c2_reference = std::move(runs.back());
    runs.pop_back();
    out.rows = std::move(runs);
    return out;
}

struct GridSize {
    int side = 50;
    int steps = 200;
    std::size_t episodes = 0;  // 0: use the sweep default
};

inline std::vector<GridSize> default_scaling_grids() { return {{25, 50}, {50, 200}, {75, 350}}; }
inline GridSize large_scaling_grid() { return {100, 500, 100}; }

// Upper bound on one agent's coverage of the grid: 5 new cells per step.
inline double coverage_bound(int side, int steps) {
    return 5.0 * static_cast<double>(steps) / (static_cast<double>(side) * static_cast<double>(side));
}

struct ScalingRow {
    GridSize grid;
    double coverage_bound = 0.0;
    std::vector<ConditionRun> runs;  // one per protocol, shared seeds
};

inline std::vector<ScalingRow> scaling_sweep(const EpisodeConfig& base, std::span<const GridSize> grids,
                                             const RunOptions& opt) {
    std::vector<ScalingRow> rows;
    for (std::size_t g = 0; g < grids.size(); ++g) {
        EpisodeConfig cfg = base;
        cfg.grid.side_length = grids[g].side;
        cfg.grid.max_steps = grids[g].steps;
        RunOptions o = opt;
        if (grids[g].episodes > 0) o.episodes = grids[g].episodes;
        ScalingRow row;
        row.grid = grids[g];
        row.coverage_bound = coverage_bound(grids[g].side, grids[g].steps);
        row.runs = compare_protocols(cfg, o, kScalingSeedGroup + g);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct PairTest {
    std::string condition;  // label without the protocol
    std::string metric;     // success, meh, final_jsd, final_alignment
    Protocol a = Protocol::silent;
    Protocol b = Protocol::silent;
    double statistic = 0.0;  // z, or U for rank tests
    double p_value = 1.0;
    double q_value = 1.0;  // BH-adjusted over the whole family
    bool reject = false;
};

namespace detail {

inline std::string condition_without_protocol(const ConditionKey& k) {
    std::ostringstream os;
    os << "p_base=" << k.p_base << " latency=" << k.latency << " k=" << k.k << " N=" << k.side << " T=" << k.steps;
    return os.str();
}

}  // namespace detail

// Every protocol pair within each condition group, on success and MEH
// (two-proportion z) and final JSD and alignment (Mann-Whitney U). One BH
// family over everything returned.
inline std::vector<PairTest> protocol_pair_tests(std::span<const ConditionRun> runs, double q = 0.05) {
    std::vector<PairTest> tests;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (std::size_t j = i + 1; j < runs.size(); ++j) {
            const auto& a = runs[i];
            const auto& b = runs[j];
            const auto ga = detail::condition_without_protocol(a.key);
            if (ga != detail::condition_without_protocol(b.key) || a.key.protocol == b.key.protocol) continue;
            if (a.episodes.empty() || b.episodes.empty()) continue;
            auto base = [&](const char* metric) {
                PairTest t;
                t.condition = ga;
                t.metric = metric;
                t.a = a.key.protocol;
                t.b = b.key.protocol;
                return t;
            };
            {
                auto t = base("success");
                const auto z = two_proportion_z(a.summary.successes, a.summary.episodes, b.summary.successes,
                                                b.summary.episodes);
                t.statistic = z.z;
                t.p_value = z.p_value;
                tests.push_back(t);
            }
            {
                auto t = base("meh");
                const auto z = two_proportion_z(a.summary.meh_episodes, a.summary.episodes, b.summary.meh_episodes,
                                                b.summary.episodes);
                t.statistic = z.z;
                t.p_value = z.p_value;
                tests.push_back(t);
            }
            auto rank_test = [&](const char* metric, auto field) {
                std::vector<double> xa, xb;
                for (const auto& e : a.episodes) xa.push_back(field(e));
                for (const auto& e : b.episodes) xb.push_back(field(e));
                auto t = base(metric);
                const auto r = mann_whitney_u(xa, xb);
                t.statistic = r.u_a;
                t.p_value = r.p_value;
                tests.push_back(t);
            };
            rank_test("final_jsd", [](const EpisodeResult& e) { return e.final_jsd; });
            rank_test("final_alignment", [](const EpisodeResult& e) { return e.final_alignment; });
        }
    }
    if (tests.empty()) return tests;
    std::vector<double> ps;
    for (const auto& t : tests) ps.push_back(t.p_value);
    const auto reject = benjamini_hochberg(ps, q);
    const auto adjusted = bh_adjusted(ps);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        tests[i].reject = reject[i];
        tests[i].q_value = adjusted[i];
    }
    return tests;
}

// Field-by-field equality of two episode outcomes, traces excluded.
inline bool same_outcome(const EpisodeResult& a, const EpisodeResult& b) {
    return a.seed == b.seed && a.target == b.target && a.success == b.success &&
           a.time_to_success == b.time_to_success && a.steps_run == b.steps_run && a.final_jsd == b.final_jsd &&
           a.final_alignment == b.final_alignment && a.meh_failed_denominator == b.meh_failed_denominator &&
           a.meh_all_denominator == b.meh_all_denominator && a.broadcasts_sent == b.broadcasts_sent &&
           a.messages_sent == b.messages_sent && a.messages_dropped == b.messages_dropped &&
           a.messages_delivered == b.messages_delivered && a.messages_undelivered == b.messages_undelivered &&
           a.bytes_sent == b.bytes_sent && a.alignment_per_byte == b.alignment_per_byte;
}

inline constexpr double kDenominatorTolerance = 1e-9;

// Invariant checks over finished runs: phase order on traced episodes,
// message conservation, and the MEH denominator identity.
inline std::vector<std::string> audit_runs(std::span<const ConditionRun> runs) {
    std::vector<std::string> failures;
    for (const auto& r : runs) {
        const auto& s = r.summary;
        if (s.audit_failures)
            failures.push_back(label(r.key) + ": " + std::to_string(s.audit_failures) +
                               " traced episode(s) failed the phase-order audit");
        if (s.conservation_failures)
            failures.push_back(label(r.key) + ": " + std::to_string(s.conservation_failures) +
                               " episode(s) lost track of messages");
        const double expected = s.meh_rate_failed * (1.0 - s.success_rate);
        if (std::abs(s.meh_rate_all - expected) > kDenominatorTolerance)
            failures.push_back(label(r.key) + ": MEH denominator identity off by " +
                               std::to_string(s.meh_rate_all - expected));
    }
    return failures;
}

}  // namespace herdsim
