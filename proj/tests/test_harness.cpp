#include "landau/errors.hpp"
#include "landau/grid_io.hpp"
#include "landau/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace landau;

namespace {

ordered_json torus_doc() {
    return ordered_json::parse(R"json({
      "name": "small",
      "model": {
        "domain": {"type": "torus", "lengths": ["L", "L"]},
        "constants": {"L": "sqrt(2*pi)"},
        "b": 1,
        "b0": 1
      },
      "grid": {"cells": [64, 64]},
      "p": [2, 4, 8],
      "intervals": [[0.5, 1.5], [1.5, 2.5]],
      "phi": [[0.5, 1.5]],
      "checks": ["weyl", "trace"]
    })json");
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("landau_harness_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(Config, Parses) {
    ExperimentConfig c = parse_config(torus_doc());
    EXPECT_EQ(c.name, "small");
    EXPECT_EQ(c.p, (std::vector<int>{2, 4, 8}));
    ASSERT_EQ(c.model.domain.lengths.size(), 2u);
    EXPECT_NEAR(c.model.domain.lengths[0], std::sqrt(2.0 * std::numbers::pi), 1e-15);
    EXPECT_TRUE(c.wants("weyl"));
    EXPECT_FALSE(c.wants("cluster"));
    EXPECT_EQ(c.tolerances.weyl_ratio, 0.10);
    EXPECT_TRUE(c.warnings.empty());
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"landau_levels", "variable_field", "gap_localization", "ldos_torus", "ldos_variable"}) {
        auto file = std::filesystem::path(LANDAU_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
        EXPECT_NO_THROW(load_config(file)) << name;
    }
}

TEST(Config, Rejects) {
    auto bad = torus_doc();
    bad["colour"] = "blue";
    EXPECT_THROW(parse_config(bad), ConfigError);

    bad = torus_doc();
    bad["p"] = {4, 2};
    EXPECT_THROW(parse_config(bad), ConfigError);

    bad = torus_doc();
    bad["model"]["two_form"] = {1};
    EXPECT_THROW(parse_config(bad), ConfigError);

    bad = torus_doc();
    bad["checks"] = {"weyl", "magic"};
    EXPECT_THROW(parse_config(bad), ConfigError);

    bad = torus_doc();
    bad["model"]["b"] = "1 +";
    EXPECT_THROW(parse_config(bad), ParseError);

    bad = torus_doc();
    bad["tolerances"] = {{"weyl_ratio", 0.2}, {"nonsense", 1}};
    EXPECT_THROW(parse_config(bad), ConfigError);

    EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
}

TEST(Config, TorusPIsQuantized) {
    auto doc = torus_doc();
    doc["model"]["constants"]["L"] = "sqrt(3*pi)";
    doc["p"] = {2, 3, 4};
    ExperimentConfig c = parse_config(doc);
    EXPECT_EQ(c.p, (std::vector<int>{2, 4}));
    EXPECT_FALSE(c.warnings.empty());
}

TEST(Hash, Fnv1a) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Fit, PowerLaw) {
    std::vector<double> xs{8, 16, 32, 64};
    std::vector<double> inv, flat;
    for (double x : xs) {
        inv.push_back(1.0 / x);
        flat.push_back(0.25);
    }
    PowerLawFit f = fit_power_law(xs, inv);
    EXPECT_NEAR(f.exponent, -1.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_LE(f.ci_lo, f.exponent);
    EXPECT_GE(f.ci_hi, f.exponent);
    EXPECT_FALSE(f.degenerate);
    EXPECT_NEAR(fit_power_law(xs, flat).exponent, 0.0, 1e-12);

    std::vector<double> zeros{0.1, 0.0, 0.01, 0.0};
    EXPECT_THROW(fit_power_law(xs, zeros), DegenerateFit);
    PowerLawFit g = fit_power_law_floored(xs, zeros, 1e-8);
    EXPECT_TRUE(g.degenerate);
    EXPECT_EQ(g.floor, 1e-8);
    EXPECT_THROW(fit_power_law({1, 2}, {1, 2}), ConfigError);
}

TEST(Fit, NoisyExponentHasWiderInterval) {
    std::vector<double> xs{8, 16, 32, 64}, ys;
    const double wiggle[] = {1.1, 0.9, 1.05, 0.97};
    for (int i = 0; i < 4; ++i) ys.push_back(wiggle[i] * std::pow(xs[i], -0.5));
    PowerLawFit f = fit_power_law(xs, ys);
    EXPECT_NEAR(f.exponent, -0.5, 0.1);
    EXPECT_LT(f.ci_lo, -0.5 - 1e-3);
    EXPECT_LT(f.r2, 1.0);
}

TEST(GridIo, RoundTripAndLayout) {
    auto dir = scratch("dump");
    GridDump d;
    d.rows = 3;
    d.cols = 2;
    d.values = {1, 2, 3, 4, 5, -0.5};
    write_grid_dump(dir / "g.bin", d);
    EXPECT_EQ(std::filesystem::file_size(dir / "g.bin"), 16u + 6u * 8u);
    GridDump back = read_grid_dump(dir / "g.bin");
    EXPECT_EQ(back.rows, 3u);
    EXPECT_EQ(back.cols, 2u);
    EXPECT_EQ(back.values, d.values);

    std::filesystem::resize_file(dir / "g.bin", 16 + 5 * 8);
    EXPECT_THROW(read_grid_dump(dir / "g.bin"), IoError);
    EXPECT_THROW(read_grid_dump(dir / "missing.bin"), IoError);
    d.values.pop_back();
    EXPECT_THROW(write_grid_dump(dir / "h.bin", d), IoError);
    std::filesystem::remove_all(dir);
}

TEST(Sweep, LandauLevelsSmall) {
    ExperimentConfig c = parse_config(torus_doc());
    ExperimentReport r = run_sweep(c);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_TRUE(r.complete);
    for (const auto& row : r.rows) {
        ASSERT_TRUE(row.complete) << row.failure;
        ASSERT_EQ(row.intervals.size(), 2u);
        EXPECT_EQ(row.intervals[0].measured, row.p);
        EXPECT_NEAR(row.intervals[0].predicted, row.p, 1e-9 * row.p);
        EXPECT_EQ(row.intervals[1].measured, 0);
        EXPECT_EQ(row.intervals[1].predicted, 0.0);
        ASSERT_EQ(row.traces.size(), 1u);
        EXPECT_NEAR(row.traces[0].predicted, row.p, 1e-9 * row.p);
    }
    EXPECT_DOUBLE_EQ(r.max_count_per_p, 1.0);
    EXPECT_DOUBLE_EQ(r.min_count_per_p, 1.0);
}

TEST(Sweep, FailingRowDoesNotStopTheSweep) {
    auto doc = torus_doc();
    doc["grid"]["cells"] = {32, 32};
    doc["p"] = {1, 2, 4};
    ExperimentReport r = run_sweep(parse_config(doc));
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_TRUE(r.rows[0].complete);
    EXPECT_TRUE(r.rows[1].complete);
    EXPECT_FALSE(r.rows[2].complete);
    EXPECT_NE(r.rows[2].failure.find("too coarse"), std::string::npos) << r.rows[2].failure;
    EXPECT_FALSE(r.complete);
}

TEST(Sweep, ResolutionRuleMeetsTheGate) {
    auto doc = torus_doc();
    doc["grid"] = {{"nodes_per_length", 8}};
    doc["model"]["b"] = "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)";
    doc["model"]["b0"] = 0.7;
    ExperimentConfig c = parse_config(doc);
    for (int p : {2, 8, 32}) {
        Grid g = grid_for(c, p);
        EXPECT_LE(g.resolution_ratio(p, 1.3), 0.125);
    }
}

TEST(Report, DeterministicApartFromRunBlock) {
    ExperimentConfig c = parse_config(torus_doc());
    ExperimentReport a = run_sweep(c);
    ExperimentReport b = run_sweep(c);
    EXPECT_EQ(report_csv(a), report_csv(b));

    ordered_json ja = report_json(a, "2020-01-01T00:00:00Z");
    ordered_json jb = report_json(b, "2030-01-01T00:00:00Z");
    EXPECT_NE(ja.dump(), jb.dump());
    ja.erase("run");
    jb.erase("run");
    EXPECT_EQ(ja.dump(), jb.dump());
}

TEST(Report, ThreadCountDoesNotChangeResults) {
    ExperimentConfig c = parse_config(torus_doc());
    ::setenv("LANDAU_THREADS", "1", 1);
    ordered_json one = report_json(run_sweep(c));
    ::setenv("LANDAU_THREADS", "3", 1);
    ordered_json three = report_json(run_sweep(c));
    ::setenv("LANDAU_THREADS", "zero", 1);
    EXPECT_THROW(worker_threads(), ConfigError);
    ::unsetenv("LANDAU_THREADS");
    EXPECT_EQ(worker_threads(), 1);
    one.erase("run");
    three.erase("run");
    EXPECT_EQ(one.dump(), three.dump());
}

TEST(Report, PredictionsAreCachedPerSweep) {
    ExperimentConfig c = parse_config(torus_doc());
    PredictionCache pc = compute_predictions(c);
    EXPECT_EQ(pc.hash, compute_predictions(c).hash);
    ExperimentReport r = run_sweep(c);
    EXPECT_EQ(r.prediction_hash, pc.hash);
    // Every row's prediction is the cached measure times p / 2pi.
    for (const auto& row : r.rows)
        EXPECT_EQ(row.intervals[0].predicted, row.p / (2.0 * std::numbers::pi) * pc.weyl_measure_sum[0]);

    auto doc = torus_doc();
    doc["p"] = {2, 4};
    EXPECT_EQ(compute_predictions(parse_config(doc)).hash, pc.hash);
    doc["intervals"] = {{0.5, 1.4}};
    EXPECT_NE(compute_predictions(parse_config(doc)).hash, pc.hash);
}

TEST(Report, FilesAndCsvShape) {
    ExperimentReport r = run_sweep(parse_config(torus_doc()));
    auto dir = scratch("report");
    write_report(r, dir, "small");
    ASSERT_TRUE(std::filesystem::exists(dir / "small.json"));
    ASSERT_TRUE(std::filesystem::exists(dir / "small.csv"));
    std::ifstream js(dir / "small.json");
    ordered_json j = ordered_json::parse(js);
    EXPECT_TRUE(j.contains("run"));
    EXPECT_EQ(j["provenance"]["config_hash"], r.config_hash);
    std::ifstream cs(dir / "small.csv");
    std::string header;
    std::getline(cs, header);
    EXPECT_EQ(header, "p,quantity,lo,hi,measured,predicted,deviation");
    std::filesystem::remove_all(dir);
}

TEST(Ldos, GapIsZeroAndTorusAverage) {
    auto doc = torus_doc();
    doc["grid"]["cells"] = {128, 128};
    doc["p"] = {32};
    doc["phi"] = {{1.5, 2.5}};
    ExperimentConfig gap = parse_config(doc);
    ExperimentReport g = ldos_check(gap, {{{0.5, 0.5}}});
    ASSERT_EQ(g.rows.size(), 1u);
    ASSERT_EQ(g.rows[0].ldos.size(), 1u);
    EXPECT_EQ(g.rows[0].ldos[0].measured, 0.0);
    EXPECT_EQ(g.rows[0].ldos[0].predicted, 0.0);

    doc["phi"] = {{0.5, 1.5}};
    ExperimentReport t = ldos_check(parse_config(doc), {{{0.5, 0.5}}});
    const auto& row = t.rows[0];
    ASSERT_TRUE(row.complete) << row.failure;
    EXPECT_NEAR(row.ldos_average_predicted, 1.0 / (2.0 * std::numbers::pi), 1e-12);
    EXPECT_LE(std::fabs(row.ldos_average_measured / row.ldos_average_predicted - 1.0), 0.05);
}
