#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "herdsim/experiment.hpp"

namespace herdsim {

struct TrendCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct TrendResult {
    int id = 0;
    std::string title;
    std::vector<TrendCheck> checks;

    bool pass() const {
        return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const TrendCheck& c) { return c.pass; });
    }
};

// Reference success rates at k=3, lossless, 50x50, T=200, in protocol order.
inline constexpr std::array<double, 4> kReferenceSuccess = {0.128, 0.339, 0.629, 0.698};
inline constexpr double kReferenceSuccessTolerance = 0.15;

namespace detail {

inline std::string num(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline void check(TrendResult& r, std::string name, bool pass, std::string detail) {
    r.checks.push_back({std::move(name), pass, std::move(detail)});
}

}  // namespace detail

inline const ConditionSummary& summary_for(std::span<const ConditionRun> runs, Protocol p) {
    for (const auto& r : runs)
        if (r.key.protocol == p) return r.summary;
    throw ConfigError("no run for protocol " + std::string(to_string(p)));
}

// `with_tolerance` adds the per-protocol distance to the reference rates.
inline TrendResult success_ordering(std::span<const ConditionRun> runs, bool with_tolerance) {
    using detail::num;
    TrendResult r{10, "success ordering", {}};
    const double c0 = summary_for(runs, Protocol::silent).success_rate;
    const double c1 = summary_for(runs, Protocol::semantic).success_rate;
    const double c2 = summary_for(runs, Protocol::epistemic).success_rate;
    const double c3 = summary_for(runs, Protocol::gated).success_rate;
    detail::check(r, "C3 > C2 > C1 > C0", c3 > c2 && c2 > c1 && c1 > c0,
                  num(c3) + " / " + num(c2) + " / " + num(c1) + " / " + num(c0));
    detail::check(r, "C2 - C1 >= 0.10", c2 - c1 >= 0.10, num(c2 - c1));
    detail::check(r, "C0 <= 0.25", c0 <= 0.25, num(c0));
    if (with_tolerance) {
        const std::array<double, 4> got = {c0, c1, c2, c3};
        for (std::size_t i = 0; i < got.size(); ++i) {
            const double d = got[i] - kReferenceSuccess[i];
            detail::check(r, std::string(to_string(kAllProtocols[i])) + " within 0.15 of " + num(kReferenceSuccess[i]),
                          std::abs(d) <= kReferenceSuccessTolerance, "diff " + num(d));
        }
    }
    return r;
}

inline TrendResult message_volume(std::span<const ConditionRun> runs) {
    using detail::num;
    TrendResult r{11, "message volume", {}};
    const double c2 = summary_for(runs, Protocol::epistemic).msgs_mean;
    const double c3 = summary_for(runs, Protocol::gated).msgs_mean;
    detail::check(r, "C3 <= 60 msgs", c3 <= 60.0, num(c3, 1));
    detail::check(r, "C2 >= 1000 msgs", c2 >= 1000.0, num(c2, 1));
    const double reduction = c2 > 0.0 ? 1.0 - c3 / c2 : 0.0;
    detail::check(r, "C3 reduction vs C2 >= 95%", reduction >= 0.95, num(100.0 * reduction, 1) + "%");
    return r;
}

inline TrendResult jsd_regimes(std::span<const ConditionRun> runs) {
    using detail::num;
    TrendResult r{12, "final JSD regimes", {}};
    const double c0 = summary_for(runs, Protocol::silent).final_jsd_mean;
    const double c1 = summary_for(runs, Protocol::semantic).final_jsd_mean;
    const double c2 = summary_for(runs, Protocol::epistemic).final_jsd_mean;
    const double c3 = summary_for(runs, Protocol::gated).final_jsd_mean;
    detail::check(r, "C1 < 0.02", c1 < 0.02, num(c1, 4));
    detail::check(r, "C2 < 0.02", c2 < 0.02, num(c2, 4));
    detail::check(r, "C3 in [0.02, 0.10]", c3 >= 0.02 && c3 <= 0.10, num(c3, 4));
    detail::check(r, "C0 > 0.30", c0 > 0.30, num(c0, 4));
    return r;
}

inline TrendResult meh_levels(std::span<const ConditionRun> runs) {
    using detail::num;
    TrendResult r{13, "MEH levels", {}};
    const auto& c1 = summary_for(runs, Protocol::semantic);
    const auto& c2 = summary_for(runs, Protocol::epistemic);
    const auto& c3 = summary_for(runs, Protocol::gated);
    detail::check(r, "all: C3 <= 0.10", c3.meh_rate_all <= 0.10, num(c3.meh_rate_all));
    detail::check(r, "all: C2 >= 0.25", c2.meh_rate_all >= 0.25, num(c2.meh_rate_all));
    detail::check(r, "all: C1 > C2", c1.meh_rate_all > c2.meh_rate_all,
                  num(c1.meh_rate_all) + " vs " + num(c2.meh_rate_all));
    detail::check(r, "failed: C1 >= 0.90", c1.meh_rate_failed >= 0.90, num(c1.meh_rate_failed));
    detail::check(r, "failed: C2 >= 0.90", c2.meh_rate_failed >= 0.90, num(c2.meh_rate_failed));
    detail::check(r, "failed: C3 <= 0.25", c3.meh_rate_failed <= 0.25, num(c3.meh_rate_failed));
    return r;
}

inline TrendResult tts_ordering(std::span<const ConditionRun> runs) {
    using detail::num;
    TrendResult r{14, "time-to-success ordering", {}};
    const auto t1 = summary_for(runs, Protocol::semantic).tts_mean;
    const auto t2 = summary_for(runs, Protocol::epistemic).tts_mean;
    const auto t3 = summary_for(runs, Protocol::gated).tts_mean;
    if (!t1 || !t2 || !t3) {
        detail::check(r, "TTS defined for C1, C2, C3", false, "a protocol had no successful episode");
        return r;
    }
    detail::check(r, "C2 - C1 >= 3 steps", *t2 - *t1 >= 3.0, num(*t1, 1) + " -> " + num(*t2, 1));
    detail::check(r, "C3 - C2 >= 3 steps", *t3 - *t2 >= 3.0, num(*t2, 1) + " -> " + num(*t3, 1));
    return r;
}

inline TrendResult theta_trends(const ThetaSweepResult& sweep) {
    using detail::num;
    TrendResult r{15, "theta sweep", {}};
    const auto& rows = sweep.rows;
    bool monotone = true;
    std::string msgs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].summary.msgs_mean > rows[i - 1].summary.msgs_mean) monotone = false;
        msgs += (i ? " " : "") + num(rows[i].summary.msgs_mean, 1);
    }
    detail::check(r, "msgs non-increasing in theta", monotone, msgs);

    double lo = 1e300, hi = -1e300;
    bool any = false;
    for (const auto& row : rows) {
        const double th = row.key.theta;
        if (th < 0.20 - 1e-9 || th > 0.35 + 1e-9) continue;
        any = true;
        lo = std::min(lo, row.summary.msgs_mean);
        hi = std::max(hi, row.summary.msgs_mean);
    }
    detail::check(r, "msgs band over theta in [0.20, 0.35] <= 5", any && hi - lo <= 5.0,
                  any ? "band " + num(hi - lo, 2) : "no theta in range");

    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].summary.meh_rate_failed < rows[best].summary.meh_rate_failed) best = i;
    const double th = rows.empty() ? -1.0 : rows[best].key.theta;
    detail::check(r, "MEH(failed) minimized in theta [0.15, 0.25]", th >= 0.15 - 1e-9 && th <= 0.25 + 1e-9,
                  rows.empty() ? "no rows" : "min " + num(rows[best].summary.meh_rate_failed) + " at " + num(th, 2));
    return r;
}

inline TrendResult scaling_trends(std::span<const ScalingRow> rows) {
    using detail::num;
    TrendResult r{16, "scaling sweep", {}};
    std::vector<double> gaps, c1_meh;
    bool c3_best = true;
    std::string best_detail;
    for (const auto& row : rows) {
        const auto& c1 = summary_for(row.runs, Protocol::semantic);
        const auto& c2 = summary_for(row.runs, Protocol::epistemic);
        const auto& c3 = summary_for(row.runs, Protocol::gated);
        gaps.push_back(c2.meh_rate_all - c3.meh_rate_all);
        c1_meh.push_back(c1.meh_rate_all);
        for (const auto& other : row.runs) {
            if (other.key.protocol == Protocol::gated) continue;
            if (other.summary.success_rate >= c3.success_rate ||
                other.summary.final_alignment_mean >= c3.final_alignment_mean) {
                c3_best = false;
                best_detail += "N=" + std::to_string(row.grid.side) + ": " + std::string(to_string(other.key.protocol)) +
                               " matches C3; ";
            }
        }
    }
    auto increasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] > v[i - 1])) return false;
        return v.size() >= 2;
    };
    auto join = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " -> " : "") + num(v[i]);
        return s;
    };
    detail::check(r, "C2 - C3 MEH(all) gap widens with N", increasing(gaps), join(gaps));
    detail::check(r, "C3 best success and alignment at every grid", c3_best,
                  best_detail.empty() ? "yes" : best_detail);
    detail::check(r, "C1 MEH(all) increasing in N", increasing(c1_meh), join(c1_meh));
    return r;
}

inline TrendResult apb_ratio(std::span<const ConditionRun> runs) {
    using detail::num;
    TrendResult r{17, "alignment per byte", {}};
    const auto a2 = summary_for(runs, Protocol::epistemic).apb_ratio;
    const auto a3 = summary_for(runs, Protocol::gated).apb_ratio;
    if (!a2 || !a3) {
        detail::check(r, "APB defined for C2 and C3", false, "no bytes sent");
        return r;
    }
    const double ratio = *a3 / *a2;
    detail::check(r, "C3 / C2 >= 30x", ratio >= 30.0, num(ratio, 1) + "x");
    return r;
}

// Criteria 10-13 at one calibration point. The reference-rate tolerance
// applies only at the default calibration, so it is left out here.
inline std::vector<TrendResult> calibration_checks(std::span<const ConditionRun> runs) {
    return {success_ordering(runs, false), message_volume(runs), jsd_regimes(runs), meh_levels(runs)};
}

struct CalibrationPoint {
    double miss = 0.0;
    double hit = 0.0;
    double boost = 0.0;
    std::vector<ConditionRun> runs;
    std::vector<TrendResult> checks;

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const TrendResult& r) { return r.pass(); });
    }
};

inline std::vector<double> default_calibration_misses() { return {1.0, 2.0, 4.0}; }
inline std::vector<double> default_calibration_hits() { return {10.0, 20.0, 40.0}; }
inline std::vector<double> default_calibration_boosts() { return {2.0, 4.0, 8.0}; }

// Every (miss, hit, boost) point runs all four protocols on the same seeds
// at k=3 on a lossless, zero-latency channel.
inline std::vector<CalibrationPoint> calibration_sweep(const EpisodeConfig& base, std::span<const double> misses,
                                                       std::span<const double> hits, std::span<const double> boosts,
                                                       const RunOptions& opt) {
    std::vector<CalibrationPoint> points;
    for (double miss : misses)
        for (double hit : hits)
            for (double boost : boosts) {
                EpisodeConfig cfg = base;
                cfg.grid.coordination_k = 3;
                cfg.channel.p_base = 0.0;
                cfg.channel.latency = 0;
                cfg.sensor.miss_log_decrement = miss;
                cfg.sensor.hit_log_increment = hit;
                cfg.protocol.c1_boost = boost;
                CalibrationPoint pt{miss, hit, boost, compare_protocols(cfg, opt), {}};
                pt.checks = calibration_checks(pt.runs);
                points.push_back(std::move(pt));
            }
    return points;
}

}  // namespace herdsim
