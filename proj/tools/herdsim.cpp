#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "herdsim/config.hpp"
#include "herdsim/experiment.hpp"
#include "herdsim/report.hpp"
#include "herdsim/trends.hpp"

namespace fs = std::filesystem;
using namespace herdsim;

namespace {

constexpr int kExitAuditFailed = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitCalibrationFailed = 3;

// Flag values; unset ones leave the config file (or default) alone.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> episodes;
    bool full = false;
    std::optional<std::string> out;
    std::optional<double> epsilon;
    std::optional<double> theta;
    std::optional<double> miss;
    std::optional<double> hit;
    std::optional<double> c1_boost;
    std::optional<unsigned> workers;
    std::optional<std::size_t> traced;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("-c,--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "base seed");
    app->add_option("-e,--episodes", o.episodes, "episodes per condition");
    app->add_flag("--full", o.full, "1000 episodes per condition");
    app->add_option("-o,--out", o.out, "output directory");
    app->add_option("--epsilon", o.epsilon, "MEH agreement threshold (nats)");
    app->add_option("--theta", o.theta, "C3 entropy-delta gate (nats)");
    app->add_option("--miss", o.miss, "log-mass removed from cells seen empty (nats)");
    app->add_option("--hit", o.hit, "log-mass added to a detected target (nats)");
    app->add_option("--c1-boost", o.c1_boost, "C1 log boost at zero sender entropy (nats)");
    app->add_option("-j,--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    app->add_option("--traced", o.traced, "episodes per condition recorded, audited and plotted");
}

Settings resolve(const Overrides& o) {
    Settings s;
    if (!o.config_path.empty()) s = load_config(o.config_path);
    auto& e = s.episode;
    if (o.seed) s.seed = *o.seed;
    if (o.episodes) s.episodes = *o.episodes;
    if (o.full) s.episodes = 1000;
    if (o.out) s.output_dir = *o.out;
    if (o.epsilon) e.meh.epsilon = *o.epsilon;
    if (o.theta) e.protocol.theta = *o.theta;
    if (o.miss) e.sensor.miss_log_decrement = *o.miss;
    if (o.hit) e.sensor.hit_log_increment = *o.hit;
    if (o.c1_boost) e.protocol.c1_boost = *o.c1_boost;
    if (o.workers) s.workers = *o.workers;
    if (o.traced) s.traced_episodes = *o.traced;
    validate(s);
    return s;
}

RunOptions run_options(const Settings& s) { return {s.episodes, s.seed, s.workers, s.traced_episodes}; }

int report_audit(const std::vector<std::string>& failures) {
    for (const auto& f : failures) std::cerr << "audit failed: " << f << '\n';
    return failures.empty() ? 0 : kExitAuditFailed;
}

void print_trends(const std::vector<TrendResult>& trends) {
    for (const auto& t : trends)
        for (const auto& c : t.checks) std::cout << (c.pass ? "  ok    " : "  MISS  ") << c.name << ": " << c.detail << '\n';
}

int cmd_factorial(const Settings& s) {
    FactorialDesign design;
    design.base = s.episode;
    design.loss_rates = s.loss_rates;
    design.latencies = s.latencies;
    design.coordination_ks = s.coordination_ks;
    std::cout << "factorial: " << design.condition_count() << " conditions x " << s.episodes << " episodes\n";
    const auto runs = run_factorial(design, run_options(s));
    const auto tests = protocol_pair_tests(runs);
    emit_factorial_report(s.output_dir, runs, tests);
    std::cout << "wrote " << (fs::path(s.output_dir) / "factorial.csv").string() << '\n';
    return report_audit(audit_runs(runs));
}

int cmd_theta(const Settings& s, std::vector<double> thetas) {
    if (thetas.empty()) thetas = default_thetas();
    const auto sweep = theta_sweep(s.episode, thetas, run_options(s));
    std::vector<TrendResult> trends{theta_trends(sweep)};
    print_trends(trends);
    emit_theta_report(s.output_dir, sweep, trends);
    std::vector<ConditionRun> all = sweep.rows;
    all.push_back(sweep.c2_reference);
    auto failures = audit_runs(all);
    for (const auto& row : sweep.rows) {
        if (row.key.theta != 0.0) continue;
        for (std::size_t e = 0; e < row.episodes.size(); ++e)
            if (!same_outcome(row.episodes[e], sweep.c2_reference.episodes[e])) {
                failures.push_back("theta=0 episode " + std::to_string(e) + " differs from C2");
                break;
            }
    }
    return report_audit(failures);
}

int cmd_scaling(const Settings& s, bool large) {
    auto grids = default_scaling_grids();
    if (large) grids.push_back(large_scaling_grid());
    const auto rows = scaling_sweep(s.episode, grids, run_options(s));
    std::vector<TrendResult> trends{scaling_trends(rows)};
    print_trends(trends);
    emit_scaling_report(s.output_dir, rows, trends);
    std::vector<ConditionRun> all;
    for (const auto& r : rows) all.insert(all.end(), r.runs.begin(), r.runs.end());
    return report_audit(audit_runs(all));
}

int cmd_episode(const Settings& s, const std::string& protocol, std::uint64_t index, const std::string& trace_path,
                const std::string& log_path) {
    EpisodeConfig cfg = s.episode;
    if (!protocol.empty()) cfg.protocol.variant = parse_protocol(protocol);
    cfg.seed = derive_episode_seed(s.seed, kComparisonSeedGroup, index);
    cfg.record_trace = true;
    const auto r = run_episode(cfg);
    std::cout << to_string(cfg.protocol.variant) << " seed=" << cfg.seed << " target=" << to_string(r.target)
              << " success=" << (r.success ? "yes" : "no");
    if (r.time_to_success) std::cout << " tts=" << *r.time_to_success;
    std::cout << " jsd=" << r.final_jsd << " alignment=" << r.final_alignment << " msgs=" << r.messages_sent
              << " bytes=" << r.bytes_sent << " meh=" << (r.meh_all_denominator ? "yes" : "no") << '\n';
    if (!trace_path.empty()) {
        write_file(trace_path, [&](std::ostream& out) { write_trace_csv(out, *r.trace, cfg.grid.agent_count); });
        std::cout << "trace: " << trace_path << '\n';
    }
    if (!log_path.empty()) {
        write_file(log_path,
                   [&](std::ostream& out) { write_message_log(out, r.trace->messages, cfg.grid.side_length); });
        std::cout << "message log: " << log_path << " (" << r.trace->messages.size() << " broadcasts)\n";
    }
    std::vector<std::string> failures;
    if (const auto audit = phase_order_audit(*r.trace); !audit.ok)
        failures.push_back("phase order violated by agent " + std::to_string(audit.violation->first) + " at step " +
                           std::to_string(audit.violation->second));
    if (r.messages_sent != r.messages_delivered + r.messages_dropped + r.messages_undelivered)
        failures.push_back("message counts do not balance");
    return report_audit(failures);
}

int cmd_calibrate(const Settings& s, std::vector<double> misses, std::vector<double> hits,
                  std::vector<double> boosts) {
    if (misses.empty()) misses = default_calibration_misses();
    if (hits.empty()) hits = default_calibration_hits();
    if (boosts.empty()) boosts = default_calibration_boosts();
    const auto points = calibration_sweep(s.episode, misses, hits, boosts, run_options(s));
    emit_calibration_report(s.output_dir, points);
    bool all = true;
    std::vector<ConditionRun> runs;
    for (const auto& p : points) {
        std::cout << "miss=" << p.miss << " hit=" << p.hit << " c1_boost=" << p.boost << ": "
                  << (p.pass() ? "pass" : "FAIL") << '\n';
        if (!p.pass()) print_trends(p.checks);
        all = all && p.pass();
        runs.insert(runs.end(), p.runs.begin(), p.runs.end());
    }
    if (const int rc = report_audit(audit_runs(runs)); rc != 0) return rc;
    return all ? 0 : kExitCalibrationFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent target search under four communication protocols"};
    app.require_subcommand(1);

    Overrides fo, to, so, eo, co;
    auto* factorial = app.add_subcommand("factorial", "protocol x loss x latency x k design");
    add_common(factorial, fo);

    std::vector<double> thetas;
    auto* theta = app.add_subcommand("theta-sweep", "C3 gate threshold sweep with a C2 reference");
    add_common(theta, to);
    theta->add_option("--thetas", thetas, "threshold values (default 0.00 to 0.40 step 0.05)")->delimiter(',');

    bool large = false;
    auto* scaling = app.add_subcommand("scaling", "grid-size sweep");
    add_common(scaling, so);
    scaling->add_flag("--large", large, "include 100x100, T=500 at 100 episodes");

    std::string protocol, trace_path, log_path;
    std::uint64_t episode_index = 0;
    auto* episode = app.add_subcommand("episode", "one episode with a per-step trace");
    add_common(episode, eo);
    episode->add_option("-p,--protocol", protocol, "C0, C1, C2 or C3");
    episode->add_option("--index", episode_index, "episode index within the seed group");
    episode->add_option("--trace", trace_path, "write the per-step trace CSV here");
    episode->add_option("--message-log", log_path, "write the binary message log here");

    std::vector<double> misses, hits, boosts;
    auto* calibrate = app.add_subcommand("calibrate", "sensor magnitude and C1 boost robustness grid");
    add_common(calibrate, co);
    calibrate->add_option("--misses", misses, "miss decrements to try")->delimiter(',');
    calibrate->add_option("--hits", hits, "hit increments to try")->delimiter(',');
    calibrate->add_option("--boosts", boosts, "C1 boosts to try")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (factorial->parsed()) return cmd_factorial(resolve(fo));
        if (theta->parsed()) return cmd_theta(resolve(to), thetas);
        if (scaling->parsed()) return cmd_scaling(resolve(so), large);
        if (episode->parsed()) return cmd_episode(resolve(eo), protocol, episode_index, trace_path, log_path);
        if (calibrate->parsed()) return cmd_calibrate(resolve(co), misses, hits, boosts);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    }
    return 0;
}
