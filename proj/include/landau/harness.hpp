#pragma once

#include "landau/model.hpp"
#include "landau/predictor.hpp"
#include "landau/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace landau {

using ordered_json = nlohmann::ordered_json;

/// Default thresholds of the experiment checks. Configs may override any of
/// them in a "tolerances" object using the same names.
struct Tolerances {
    double weyl_ratio = 0.10;           // |N / N_pred - 1| at the largest p
    double trace_exponent = -0.4;       // fitted exponent of the trace residual, at most
    double cluster_exponent = -0.25;    // fitted exponent of the cluster distance, at most
    double cluster_r2 = 0.9;            // and its R^2, at least
    double localization_ratio_lo = 1.6; // rate(p_max) / rate(p_min), ideal sqrt(p_max / p_min)
    double localization_ratio_hi = 2.4;
    double gauge_relative = 1e-9;       // eigenvalues under a discrete gauge transform
    double upper_bound_spread = 2.0;    // max N/p over min N/p within one sweep
    double ldos_average = 0.05;         // node-averaged local density of states
    double residual = 1e-8;             // eigenpair residual and orthogonality
    double trace_relative = 1e-6;       // counting-function trace quadrature
    double fit_confidence = 0.95;
};

/// How the lattice is chosen for each p.
struct GridRule {
    std::vector<int> cells;        // fixed cell counts; empty: use the resolution target
    double nodes_per_length = 8.0; // nodes per magnetic length (p sup b)^(-1/2)
    int multiple = 2;
};

struct LocalizationCheck {
    Interval interval{0.0, 0.0};
    LocalizationOptions options;
    int max_states = 400;
    /// Side lengths of an enlarged domain on which the gap count is repeated.
    std::vector<double> enlarged_lengths;
};

struct ExperimentConfig {
    std::string name;
    ModelSpec model;
    GridRule grid;
    std::vector<int> p;
    std::vector<Interval> intervals;  // counting / Weyl intervals
    std::vector<Interval> phi;        // supports of bump test functions
    std::vector<std::string> checks;  // weyl | trace | cluster | localization | ldos
    double cluster_k_max = 4.0;
    int cluster_max_states = 2000;
    std::optional<LocalizationCheck> localization;
    std::vector<std::array<double, 2>> ldos_points;
    int predictor_cells = 512;        // per axis, for Weyl measures and <f0, phi>
    std::uint64_t seed = 20170521;
    std::string output_dir = "out";
    Tolerances tolerances;
    std::vector<std::string> warnings; // p adjustments made while loading
    ordered_json source;               // the config as read, for hashing

    bool wants(const std::string& check) const;
};

/// Reads a config document. Constants may be numbers or constant expressions
/// and are evaluated in file order, so later ones can use earlier ones; side
/// lengths and origins accept the same forms. Torus p lists are filtered to
/// flux-quantized values (see quantize_p_list). Throws ConfigError / ParseError.
ExperimentConfig parse_config(const ordered_json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Replaces every p whose flux p Phi / 2pi is not an integer by the nearest
/// admissible value, drops duplicates, and records a warning for each change.
/// Rectangles are returned unchanged.
std::vector<int> quantize_p_list(const ModelSpec& model, const std::vector<int>& p, std::vector<std::string>& warnings);

/// 64-bit FNV-1a of a byte string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct PowerLawFit {
    double exponent = 0.0;
    double intercept = 0.0;   // log y at log p = 0
    double r2 = 0.0;
    double ci_lo = 0.0;       // confidence interval of the exponent
    double ci_hi = 0.0;
    double confidence = 0.95;
    int points = 0;
    bool degenerate = false;  // some y were zero and replaced by a floor
    double floor = 0.0;
};

/// Least squares on (log x, log y). Needs at least three points and positive
/// x; throws DegenerateFit if any y is zero, ConfigError if any y < 0.
PowerLawFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys, double confidence = 0.95);

/// As fit_power_law, but zeros are replaced by `floor` and the fit flagged.
PowerLawFit fit_power_law_floored(const std::vector<double>& xs, std::vector<double> ys, double floor,
                                  double confidence = 0.95);

/// p-independent predictor quantities shared by every row of a sweep.
struct PredictionCache {
    std::vector<double> weyl_measure_sum;  // per interval; N_pred = p / 2pi * sum
    std::vector<bool> weyl_boundary_warning;
    std::vector<double> f0;                // per phi
    LandauBandSet bands;
    double sup_b = 0.0;
    std::string hash;                      // FNV-1a of the cached values
};

PredictionCache compute_predictions(const ExperimentConfig& config);

struct IntervalRow {
    Interval interval;
    long measured = 0;
    double predicted = 0.0;
    double ratio = 0.0;       // measured / predicted (0 when both vanish)
};

struct TraceRow {
    Interval support;
    double measured = 0.0;
    double predicted = 0.0;   // p <f0, phi>
    double relative_residual = 0.0;
    std::string method;
    long count = 0;
};

struct LocalizationRow {
    long count = 0;
    long enlarged_count = -1;  // -1 when no enlarged domain was requested
    double aggregate_rate = 0.0;
    double aggregate_c_hat = 0.0;
    double aggregate_r2 = 0.0;
    double median_rate = 0.0;
    double min_rate = 0.0;
    double max_rate = 0.0;
    double excluded_mass = 0.0;
    std::vector<double> eigenvalues;
};

struct LdosRow {
    std::array<double, 2> point{};
    std::array<double, 2> node{};   // lattice node used
    double measured = 0.0;          // p^-1 K_phi(x0, x0)
    double predicted = 0.0;         // local_f0(x0)
    double relative_deviation = 0.0;
};

struct SweepRow {
    int p = 0;
    std::vector<int> cells;
    long unknowns = 0;
    bool complete = true;
    std::string failure;
    std::vector<IntervalRow> intervals;
    std::vector<TraceRow> traces;
    double cluster_distance = -1.0;       // -1: not run
    long cluster_count = 0;
    std::optional<LocalizationRow> localization;
    std::vector<LdosRow> ldos;
    double ldos_average_measured = 0.0;   // node average of p^-1 K_phi(x, x)
    double ldos_average_predicted = 0.0;  // node average of local_f0
    double worst_residual = 0.0;
    double seconds = 0.0;                 // wall clock, reported in the run block
};

struct NamedFit {
    std::string quantity;
    PowerLawFit fit;
};

struct ExperimentReport {
    std::string name;
    std::string config_hash;
    std::string prediction_hash;
    std::vector<std::string> warnings;
    PredictionCache predictions;
    std::vector<SweepRow> rows;        // ascending p
    std::vector<NamedFit> fits;
    double max_count_per_p = 0.0;      // max over rows and intervals of N / p
    double min_count_per_p = 0.0;      // same, over nonzero counts
    bool complete = true;
};

/// Runs every requested check for each p. A failing p is recorded in its row
/// and the sweep continues. Rows run on LANDAU_THREADS workers (default 1).
ExperimentReport run_sweep(const ExperimentConfig& config);

/// Local density of states at the given points against local_f0, for each p.
ExperimentReport ldos_check(const ExperimentConfig& config, const std::vector<std::array<double, 2>>& points);

/// Grid for one p under the config's rule, checked against the resolution gate.
Grid grid_for(const ExperimentConfig& config, int p);

/// Report documents. The "run" object holds the timestamp and timings and is
/// the only part that differs between repeated runs.
ordered_json report_json(const ExperimentReport& report, const std::string& timestamp = "");
std::string report_csv(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem);

int worker_threads();

} // namespace landau
