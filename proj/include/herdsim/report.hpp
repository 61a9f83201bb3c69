#pragma once

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "herdsim/error.hpp"
#include "herdsim/experiment.hpp"
#include "herdsim/trends.hpp"

namespace herdsim {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

// ---- CSV ----------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

// Quotes a field when it holds a comma, quote, CR or LF; quotes double.
inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << "\r\n";
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    write_csv_row(out, t.header);
    for (const auto& r : t.rows) write_csv_row(out, r);
}

// Accepts CRLF or LF line ends and quoted fields spanning lines.
inline CsvTable parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false, any = false;
    char ch;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(row));
        row.clear();
        any = false;
    };
    while (in.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
            any = true;
        } else if (ch == ',') {
            end_field();
            any = true;
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get(ch);
            end_row();
        } else if (ch == '\n') {
            end_row();
        } else {
            field += ch;
            field_started = true;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quoted field");
    if (any || !field.empty()) end_row();
    CsvTable t;
    if (records.empty()) return t;
    t.header = std::move(records.front());
    t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    return t;
}

inline std::vector<std::string> condition_csv_header() {
    return {"condition", "protocol", "p_base", "latency", "k", "N", "T", "theta", "episodes", "successes",
            "success_rate", "tts_mean", "tts_sd", "final_jsd_mean", "final_jsd_sd", "final_alignment_mean",
            "final_alignment_sd", "meh_rate_all", "meh_rate_failed", "msgs_mean", "bytes_mean", "apb_mean",
            "apb_ratio", "audited_episodes", "audit_failures", "label"};
}

inline std::vector<std::string> condition_csv_row(std::size_t index, const ConditionSummary& s) {
    const auto& k = s.key;
    return {std::to_string(index),
            std::string(to_string(k.protocol)),
            format_double(k.p_base),
            std::to_string(k.latency),
            std::to_string(k.k),
            std::to_string(k.side),
            std::to_string(k.steps),
            format_double(k.theta),
            std::to_string(s.episodes),
            std::to_string(s.successes),
            format_double(s.success_rate),
            format_optional(s.tts_mean),
            format_optional(s.tts_sd),
            format_double(s.final_jsd_mean),
            format_double(s.final_jsd_sd),
            format_double(s.final_alignment_mean),
            format_double(s.final_alignment_sd),
            format_double(s.meh_rate_all),
            format_double(s.meh_rate_failed),
            format_double(s.msgs_mean),
            format_double(s.bytes_mean),
            format_optional(s.apb_mean),
            format_optional(s.apb_ratio),
            std::to_string(s.audited_episodes),
            std::to_string(s.audit_failures),
            label(k)};
}

inline CsvTable summary_table(std::span<const ConditionRun> runs) {
    CsvTable t;
    t.header = condition_csv_header();
    for (std::size_t i = 0; i < runs.size(); ++i) t.rows.push_back(condition_csv_row(i, runs[i].summary));
    return t;
}

inline CsvTable pair_test_table(std::span<const PairTest> tests) {
    CsvTable t;
    t.header = {"condition", "metric", "a", "b", "statistic", "p_value", "q_value", "reject"};
    for (const auto& x : tests)
        t.rows.push_back({x.condition, x.metric, std::string(to_string(x.a)), std::string(to_string(x.b)),
                          format_double(x.statistic), format_double(x.p_value), format_double(x.q_value),
                          x.reject ? "1" : "0"});
    return t;
}

// ---- plot data (TSV) ------------------------------------------------------

// Numeric columns, tab separated, one header line. Lines starting with '#'
// are comments and ignored on read.
struct PlotData {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline void write_plot_data(std::ostream& out, const PlotData& d, std::string_view comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    for (std::size_t i = 0; i < d.columns.size(); ++i) out << (i ? "\t" : "") << d.columns[i];
    out << '\n';
    for (const auto& r : d.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << format_double(r[i]);
        out << '\n';
    }
}

inline PlotData read_plot_data(std::istream& in) {
    PlotData d;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            cells.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (header) {
            d.columns = std::move(cells);
            header = false;
            continue;
        }
        if (cells.size() != d.columns.size()) throw ConfigError("plot data: ragged row");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c));
        d.rows.push_back(std::move(row));
    }
    return d;
}

// Per-step JSD (or alignment) by outcome for each run carrying a series.
// Columns are t, then <label>_success and <label>_failure per run.
inline PlotData outcome_plot(std::span<const ConditionRun> runs, bool alignment) {
    PlotData d;
    d.columns.push_back("t");
    std::vector<const OutcomeSeries*> series;
    std::size_t len = 0;
    for (const auto& r : runs) {
        if (!r.series) continue;
        const std::string name(to_string(r.key.protocol));
        d.columns.push_back(name + "_success");
        d.columns.push_back(name + "_failure");
        series.push_back(&*r.series);
        len = std::max(len, r.series->jsd_success.size());
    }
    const double nan = std::nan("");
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> row{static_cast<double>(t + 1)};
        for (const auto* s : series) {
            const auto& ok = alignment ? s->alignment_success : s->jsd_success;
            const auto& bad = alignment ? s->alignment_failure : s->jsd_failure;
            row.push_back(s->success_episodes && t < ok.size() ? ok[t] : nan);
            row.push_back(s->failure_episodes && t < bad.size() ? bad[t] : nan);
        }
        d.rows.push_back(std::move(row));
    }
    return d;
}

// One point per condition: success rate against both MEH rates.
inline PlotData success_vs_meh_plot(std::span<const ConditionRun> runs) {
    PlotData d;
    d.columns = {"condition", "protocol", "p_base", "latency", "k", "N", "success_rate", "meh_rate_all",
                 "meh_rate_failed"};
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& s = runs[i].summary;
        d.rows.push_back({static_cast<double>(i), static_cast<double>(static_cast<int>(s.key.protocol)), s.key.p_base,
                          static_cast<double>(s.key.latency), static_cast<double>(s.key.k),
                          static_cast<double>(s.key.side), s.success_rate, s.meh_rate_all, s.meh_rate_failed});
    }
    return d;
}

inline PlotData theta_plot(const ThetaSweepResult& sweep) {
    PlotData d;
    d.columns = {"theta", "success_rate", "tts_mean", "meh_rate_failed", "meh_rate_all", "final_jsd_mean",
                 "final_alignment_mean", "msgs_mean", "apb_ratio"};
    const double nan = std::nan("");
    for (const auto& r : sweep.rows) {
        const auto& s = r.summary;
        d.rows.push_back({s.key.theta, s.success_rate, s.tts_mean.value_or(nan), s.meh_rate_failed, s.meh_rate_all,
                          s.final_jsd_mean, s.final_alignment_mean, s.msgs_mean, s.apb_ratio.value_or(nan)});
    }
    return d;
}

// ---- markdown -------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "-"; }

inline std::string micro(const std::optional<double>& v) { return v ? fixed(*v * 1e6, 1) : "-"; }

inline void md_row(std::ostream& out, const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
}

inline void md_header(std::ostream& out, const std::vector<std::string>& cells) {
    md_row(out, cells);
    out << '|';
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
    out << '\n';
}

inline std::string loss_percent(double p) { return fixed(100.0 * p, 0); }

// Mean of a summary field over runs matching protocol and k.
template <class F>
std::optional<double> mean_over(std::span<const ConditionRun> runs, Protocol p, int k, F field) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : runs) {
        if (r.key.protocol != p || r.key.k != k) continue;
        const std::optional<double> v = field(r.summary);
        if (!v) continue;
        total += *v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
}

inline std::vector<int> ks_present(std::span<const ConditionRun> runs) {
    std::vector<int> ks;
    for (const auto& r : runs)
        if (std::find(ks.begin(), ks.end(), r.key.k) == ks.end()) ks.push_back(r.key.k);
    std::sort(ks.begin(), ks.end());
    return ks;
}

}  // namespace detail

inline void write_protocol_table(std::ostream& out) {
    out << "### Protocols\n\n";
    detail::md_header(out, {"Protocol", "Content", "Trigger", "Receiver update"});
    detail::md_row(out, {"C0", "none", "never", "none"});
    detail::md_row(out, {"C1", "argmax cell + entropy", "every step", "log boost on the reported cell"});
    detail::md_row(out, {"C2", "top-5 cells + entropy", "every step", "inverse-entropy weighted fusion"});
    detail::md_row(out, {"C3", "top-5 cells + entropy", "|dH| >= theta", "inverse-entropy weighted fusion"});
    out << '\n';
}

// Alignment, success and time by protocol and k, averaged over the
// network conditions present.
inline void write_task_table(std::ostream& out, std::span<const ConditionRun> runs) {
    using namespace detail;
    const auto ks = ks_present(runs);
    out << "### Task performance (means over network conditions)\n\n";
    std::vector<std::string> head{"Comm"};
    for (const char* m : {"Align", "Success", "Time"})
        for (int k : ks) head.push_back(std::string(m) + " k=" + std::to_string(k));
    md_header(out, head);
    for (auto p : kAllProtocols) {
        std::vector<std::string> row{std::string(to_string(p))};
        for (int k : ks)
            row.push_back(fixed(mean_over(runs, p, k, [](const ConditionSummary& s) -> std::optional<double> {
                                    return s.final_alignment_mean;
                                }), 3));
        for (int k : ks)
            row.push_back(fixed(
                mean_over(runs, p, k, [](const ConditionSummary& s) -> std::optional<double> { return s.success_rate; }),
                3));
        for (int k : ks)
            row.push_back(
                fixed(mean_over(runs, p, k, [](const ConditionSummary& s) { return s.tts_mean; }), 1));
        md_row(out, row);
    }
    out << '\n';
}

inline void write_efficiency_table(std::ostream& out, std::span<const ConditionRun> runs) {
    using namespace detail;
    const auto ks = ks_present(runs);
    out << "### Communication efficiency (means over network conditions; APB x 1e-6)\n\n";
    std::vector<std::string> head{"Comm"};
    for (const char* m : {"APB", "Msgs", "MEH (failed)", "MEH (all)"})
        for (int k : ks) head.push_back(std::string(m) + " k=" + std::to_string(k));
    md_header(out, head);
    for (auto p : {Protocol::semantic, Protocol::epistemic, Protocol::gated}) {
        std::vector<std::string> row{std::string(to_string(p))};
        for (int k : ks) row.push_back(micro(mean_over(runs, p, k, [](const ConditionSummary& s) { return s.apb_ratio; })));
        for (int k : ks)
            row.push_back(fixed(
                mean_over(runs, p, k, [](const ConditionSummary& s) -> std::optional<double> { return s.msgs_mean; }), 0));
        for (int k : ks)
            row.push_back(fixed(mean_over(runs, p, k, [](const ConditionSummary& s) -> std::optional<double> {
                                    return s.meh_rate_failed;
                                }), 3));
        for (int k : ks)
            row.push_back(fixed(
                mean_over(runs, p, k, [](const ConditionSummary& s) -> std::optional<double> { return s.meh_rate_all; }),
                3));
        md_row(out, row);
    }
    out << '\n';
}

// One row per condition, grouped by k.
inline void write_condition_tables(std::ostream& out, std::span<const ConditionRun> runs) {
    using namespace detail;
    for (int k : ks_present(runs)) {
        out << "### Conditions, k=" << k << "\n\n";
        md_header(out, {"Protocol", "Loss (%)", "Latency", "Success", "TTS Mean", "TTS SD", "JSD", "Align",
                        "MEH (failed)", "MEH (all)", "Msgs", "APB x 1e-6"});
        for (const auto& r : runs) {
            if (r.key.k != k) continue;
            const auto& s = r.summary;
            md_row(out, {std::string(to_string(s.key.protocol)), loss_percent(s.key.p_base), std::to_string(s.key.latency),
                         fixed(s.success_rate, 3), fixed(s.tts_mean, 1), fixed(s.tts_sd, 1), fixed(s.final_jsd_mean, 4),
                         fixed(s.final_alignment_mean, 3), fixed(s.meh_rate_failed, 3), fixed(s.meh_rate_all, 3),
                         fixed(s.msgs_mean, 1), micro(s.apb_ratio)});
        }
        out << '\n';
    }
}

inline void write_theta_table(std::ostream& out, const ThetaSweepResult& sweep) {
    using namespace detail;
    out << "### Gate threshold sensitivity (C3; APB x 1e-6)\n\n";
    md_header(out, {"theta", "Success", "Time", "MEH (failed)", "MEH (all)", "JSD", "Align", "Msgs", "APB"});
    auto row = [&](const std::string& name, const ConditionSummary& s) {
        md_row(out, {name, fixed(s.success_rate, 3), fixed(s.tts_mean, 1), fixed(s.meh_rate_failed, 3),
                     fixed(s.meh_rate_all, 3), fixed(s.final_jsd_mean, 3), fixed(s.final_alignment_mean, 3),
                     fixed(s.msgs_mean, 1), micro(s.apb_ratio)});
    };
    for (const auto& r : sweep.rows) row(fixed(r.key.theta, 2), r.summary);
    row("C2 (same seeds)", sweep.c2_reference.summary);
    out << '\n';
}

inline void write_scaling_table(std::ostream& out, std::span<const ScalingRow> rows) {
    using namespace detail;
    out << "### Scaling across grid sizes\n\n";
    md_header(out, {"Protocol", "Grid", "T", "Coverage bound", "Success", "MEH (failed)", "MEH (all)", "Align", "JSD"});
    for (const auto& row : rows) {
        const std::string grid = std::to_string(row.grid.side) + "x" + std::to_string(row.grid.side);
        for (const auto& r : row.runs) {
            const auto& s = r.summary;
            md_row(out, {std::string(to_string(s.key.protocol)), grid, std::to_string(row.grid.steps),
                         fixed(100.0 * row.coverage_bound, 1) + "%", fixed(s.success_rate, 3),
                         fixed(s.meh_rate_failed, 3), fixed(s.meh_rate_all, 3), fixed(s.final_alignment_mean, 3),
                         fixed(s.final_jsd_mean, 4)});
        }
    }
    out << '\n';
}

inline void write_pair_test_summary(std::ostream& out, std::span<const PairTest> tests, double q = 0.05) {
    std::size_t rejected = 0;
    for (const auto& t : tests) rejected += t.reject ? 1 : 0;
    out << "### Pairwise protocol tests\n\n"
        << tests.size() << " tests (two-proportion z for success and MEH, Mann-Whitney U for final JSD and "
        << "alignment; every protocol pair within each condition), Benjamini-Hochberg at q = " << q << ": "
        << rejected << " rejected.\n\n";
}

inline void write_trend_results(std::ostream& out, std::span<const TrendResult> results) {
    if (results.empty()) return;
    out << "### Trend checks\n\n";
    detail::md_header(out, {"Check", "Result", "Detail"});
    for (const auto& r : results)
        for (const auto& c : r.checks) detail::md_row(out, {c.name, c.pass ? "pass" : "FAIL", c.detail});
    out << '\n';
}

// ---- files ----------------------------------------------------------------

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
}

template <class F>
void write_file(const std::filesystem::path& path, F&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), std::strerror(errno));
    body(out);
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
}

inline void write_csv_file(const std::filesystem::path& path, const CsvTable& t) {
    write_file(path, [&](std::ostream& out) { write_csv(out, t); });
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), std::strerror(errno));
    return parse_csv(in);
}

inline void write_plot_file(const std::filesystem::path& path, const PlotData& d, std::string_view comment = {}) {
    write_file(path, [&](std::ostream& out) { write_plot_data(out, d, comment); });
}

inline PlotData read_plot_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), std::strerror(errno));
    return read_plot_data(in);
}

// Runs at the reference network setting (lossless, no latency) for one k,
// used for the by-outcome plots.
inline std::vector<ConditionRun> reference_runs(std::span<const ConditionRun> runs, int k) {
    std::vector<ConditionRun> out;
    for (const auto& r : runs)
        if (r.key.k == k && r.key.p_base == 0.0 && r.key.latency == 0) out.push_back(r);
    return out;
}

inline void emit_factorial_report(const std::filesystem::path& dir, std::span<const ConditionRun> runs,
                                  std::span<const PairTest> tests) {
    if (runs.empty()) throw ConfigError("emit_factorial_report: no conditions");
    ensure_directory(dir);
    write_csv_file(dir / "factorial.csv", summary_table(runs));
    write_csv_file(dir / "factorial_tests.csv", pair_test_table(tests));
    const auto ks = detail::ks_present(runs);
    const int plot_k = std::find(ks.begin(), ks.end(), 3) != ks.end() ? 3 : ks.front();
    const auto ref = reference_runs(runs, plot_k);
    const std::string note = "k=" + std::to_string(plot_k) + ", lossless, no latency; traced episodes only";
    write_plot_file(dir / "jsd_by_outcome.tsv", outcome_plot(ref, false), note);
    write_plot_file(dir / "alignment_by_outcome.tsv", outcome_plot(ref, true), note);
    write_plot_file(dir / "success_vs_meh.tsv", success_vs_meh_plot(runs));
    write_file(dir / "factorial_report.md", [&](std::ostream& out) {
        out << "# Factorial experiment\n\n" << runs.size() << " conditions, " << runs.front().summary.episodes
            << " episodes each.\n\n";
        write_protocol_table(out);
        write_task_table(out, runs);
        write_efficiency_table(out, runs);
        write_condition_tables(out, runs);
        write_pair_test_summary(out, tests);
    });
}

inline void emit_theta_report(const std::filesystem::path& dir, const ThetaSweepResult& sweep,
                              std::span<const TrendResult> trends = {}) {
    ensure_directory(dir);
    std::vector<ConditionRun> all = sweep.rows;
    all.push_back(sweep.c2_reference);
    write_csv_file(dir / "theta_sweep.csv", summary_table(all));
    write_plot_file(dir / "theta_curves.tsv", theta_plot(sweep));
    write_file(dir / "theta_report.md", [&](std::ostream& out) {
        out << "# Gate threshold sweep\n\n";
        write_theta_table(out, sweep);
        write_trend_results(out, trends);
    });
}

inline void emit_scaling_report(const std::filesystem::path& dir, std::span<const ScalingRow> rows,
                                std::span<const TrendResult> trends = {}) {
    ensure_directory(dir);
    std::vector<ConditionRun> all;
    for (const auto& row : rows) all.insert(all.end(), row.runs.begin(), row.runs.end());
    write_csv_file(dir / "scaling.csv", summary_table(all));
    write_plot_file(dir / "scaling_success_vs_meh.tsv", success_vs_meh_plot(all));
    write_file(dir / "scaling_report.md", [&](std::ostream& out) {
        out << "# Scaling sweep\n\n";
        write_scaling_table(out, rows);
        write_trend_results(out, trends);
    });
}

inline CsvTable calibration_table(std::span<const CalibrationPoint> points) {
    CsvTable t;
    t.header = {"miss_log_decrement", "hit_log_increment", "c1_boost", "protocol", "success_rate", "final_jsd_mean",
                "meh_rate_all", "meh_rate_failed", "msgs_mean", "point_pass"};
    for (const auto& p : points)
        for (const auto& r : p.runs) {
            const auto& s = r.summary;
            t.rows.push_back({format_double(p.miss), format_double(p.hit), format_double(p.boost),
                              std::string(to_string(s.key.protocol)), format_double(s.success_rate),
                              format_double(s.final_jsd_mean), format_double(s.meh_rate_all),
                              format_double(s.meh_rate_failed), format_double(s.msgs_mean), p.pass() ? "1" : "0"});
        }
    return t;
}

inline void emit_calibration_report(const std::filesystem::path& dir, std::span<const CalibrationPoint> points) {
    ensure_directory(dir);
    write_csv_file(dir / "calibration.csv", calibration_table(points));
    write_file(dir / "calibration_report.md", [&](std::ostream& out) {
        using namespace detail;
        out << "# Calibration sweep\n\n";
        md_header(out, {"miss", "hit", "c1_boost", "C0 / C1 / C2 / C3 success", "Result", "Failed checks"});
        for (const auto& p : points) {
            std::string rates, failed;
            for (const auto& r : p.runs) rates += (rates.empty() ? "" : " / ") + fixed(r.summary.success_rate, 3);
            for (const auto& tr : p.checks)
                for (const auto& c : tr.checks)
                    if (!c.pass) failed += (failed.empty() ? "" : "; ") + c.name + " (" + c.detail + ")";
            md_row(out, {fixed(p.miss, 1), fixed(p.hit, 1), fixed(p.boost, 1), rates, p.pass() ? "pass" : "FAIL",
                         failed.empty() ? "-" : failed});
        }
        out << '\n';
    });
}

}  // namespace herdsim
