#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "herdsim/report.hpp"

using namespace herdsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("herdsim_report_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

EpisodeConfig small() {
    EpisodeConfig c;
    c.grid.side_length = 12;
    c.grid.max_steps = 30;
    return c;
}

}  // namespace

TEST(Csv, EscapeOnlyWhenNeeded) {
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
    EXPECT_EQ(csv_escape(""), "");
}

TEST(Csv, RoundTripAwkwardFields) {
    CsvTable t;
    t.header = {"name", "note", "value"};
    t.rows = {{"C3 p_base=0.1", "has, comma", "1.5"},
              {"quoted", "\"start\" and \"end\"", ""},
              {"multi", "line one\r\nline two\nthree", "-0"},
              {"", "", ""}};
    std::stringstream io;
    write_csv(io, t);
    EXPECT_NE(io.str().find("\r\n"), std::string::npos);
    EXPECT_EQ(parse_csv(io), t);
}

TEST(Csv, ParsesLfAndRejectsUnterminatedQuote) {
    std::istringstream lf("a,b\n1,2\n");
    const auto t = parse_csv(lf);
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0], (std::vector<std::string>{"1", "2"}));
    std::istringstream bad("a,\"b\n");
    EXPECT_THROW(parse_csv(bad), ConfigError);
}

TEST(Numbers, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 27.1e-6}) EXPECT_EQ(parse_double(format_double(v)), v);
    EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")))));
    EXPECT_EQ(parse_double(format_double(HUGE_VAL)), HUGE_VAL);
    EXPECT_THROW(parse_double("1.2x"), ConfigError);
    EXPECT_EQ(format_optional(std::nullopt), "");
}

TEST(Plot, RoundTripWithNan) {
    PlotData d;
    d.columns = {"t", "C2_success", "C2_failure"};
    d.rows = {{1, 0.5, std::nan("")}, {2, 1.0 / 7.0, 0.25}};
    std::stringstream io;
    write_plot_data(io, d, "note");
    EXPECT_EQ(io.str().rfind("# note\n", 0), 0u);
    const auto back = read_plot_data(io);
    EXPECT_EQ(back.columns, d.columns);
    ASSERT_EQ(back.rows.size(), 2u);
    EXPECT_EQ(back.rows[0][1], 0.5);
    EXPECT_TRUE(std::isnan(back.rows[0][2]));
    EXPECT_EQ(back.rows[1][1], 1.0 / 7.0);
}

TEST(Plot, RaggedRowRejected) {
    std::istringstream in("a\tb\n1\n");
    EXPECT_THROW(read_plot_data(in), ConfigError);
}

TEST(SummaryTable, OneRowPerCondition) {
    FactorialDesign d;
    d.base = small();
    RunOptions o;
    o.episodes = 1;
    const auto runs = run_factorial(d, o);
    const auto t = summary_table(runs);
    ASSERT_EQ(t.rows.size(), 108u);
    for (const auto& r : t.rows) EXPECT_EQ(r.size(), t.header.size());
    std::stringstream io;
    write_csv(io, t);
    EXPECT_EQ(parse_csv(io), t);
}

TEST(Reports, FactorialFilesAndBothMehColumns) {
    FactorialDesign d;
    d.base = small();
    d.loss_rates = {0.0, 0.1};
    d.latencies = {0};
    d.coordination_ks = {2, 3};
    RunOptions o;
    o.episodes = 6;
    o.traced_episodes = 3;
    const auto runs = run_factorial(d, o);
    const auto tests = protocol_pair_tests(runs);
    const auto dir = scratch("factorial");
    emit_factorial_report(dir, runs, tests);

    for (const char* f : {"factorial.csv", "factorial_tests.csv", "jsd_by_outcome.tsv", "alignment_by_outcome.tsv",
                          "success_vs_meh.tsv", "factorial_report.md"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(read_csv_file(dir / "factorial.csv"), summary_table(runs));
    EXPECT_EQ(read_csv_file(dir / "factorial_tests.csv").rows.size(), tests.size());

    const auto md = slurp(dir / "factorial_report.md");
    EXPECT_NE(md.find("MEH (failed) k=2"), std::string::npos);
    EXPECT_NE(md.find("MEH (all) k=3"), std::string::npos);
    EXPECT_NE(md.find("| MEH (failed) | MEH (all) |"), std::string::npos);
    EXPECT_NE(md.find("Benjamini-Hochberg"), std::string::npos);

    const auto jsd = read_plot_file(dir / "jsd_by_outcome.tsv");
    EXPECT_EQ(jsd.columns.size(), 1u + 2u * 4u);
    EXPECT_EQ(jsd.rows.size(), 30u);
    fs::remove_all(dir);
}

TEST(Reports, ThetaAndScalingFiles) {
    RunOptions o;
    o.episodes = 3;
    const std::vector<double> thetas{0.0, 0.2};
    const auto sweep = theta_sweep(small(), thetas, o);
    const auto dir = scratch("sweeps");
    emit_theta_report(dir, sweep);
    EXPECT_EQ(read_csv_file(dir / "theta_sweep.csv").rows.size(), 3u);
    const auto curves = read_plot_file(dir / "theta_curves.tsv");
    ASSERT_EQ(curves.rows.size(), 2u);
    EXPECT_EQ(curves.rows[1][0], 0.2);
    EXPECT_NE(slurp(dir / "theta_report.md").find("C2 (same seeds)"), std::string::npos);

    const std::vector<GridSize> grids{{10, 20, 0}};
    const auto rows = scaling_sweep(small(), grids, o);
    emit_scaling_report(dir, rows);
    EXPECT_EQ(read_csv_file(dir / "scaling.csv").rows.size(), 4u);
    const auto md = slurp(dir / "scaling_report.md");
    EXPECT_NE(md.find("MEH (failed)"), std::string::npos);
    EXPECT_NE(md.find("MEH (all)"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Files, ErrorsCarryPath) {
    const fs::path missing = "/nonexistent-herdsim-dir/x.csv";
    try {
        read_csv_file(missing);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_EQ(e.path(), missing.string());
    }
    EXPECT_THROW(write_csv_file(missing, CsvTable{}), IoError);
    EXPECT_THROW(read_plot_file(missing), IoError);
}
