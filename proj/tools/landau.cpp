// landau: command-line driver for the experiment configs in configs/.

#include "landau/discretize.hpp"
#include "landau/errors.hpp"
#include "landau/grid_io.hpp"
#include "landau/harness.hpp"
#include "landau/spectral.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

using namespace landau;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::vector<int> p;
    std::vector<int> grid;
    std::string matrix;
    std::vector<std::string> intervals;
    int max_m = 100000;
    bool densities = false;
};

Interval parse_interval(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("interval must be written lo:hi, got " + text);
    Interval iv;
    try {
        iv = {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError("interval must be written lo:hi, got " + text);
    }
    if (!(iv.lo < iv.hi)) throw ConfigError("interval must satisfy lo < hi");
    return iv;
}

std::vector<Interval> cli_intervals(const Options& o) {
    std::vector<Interval> out;
    for (const auto& t : o.intervals) out.push_back(parse_interval(t));
    return out;
}

fs::path out_dir(const Options& o, const ExperimentConfig& c) { return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out); }

void write_json(const fs::path& file, const ordered_json& j) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + file.string());
    std::cout << "wrote " << file.string() << '\n';
}

ExperimentConfig load(const Options& o) {
    if (o.config.empty()) throw ConfigError("this command needs --config");
    ExperimentConfig c = load_config(o.config);
    if (!o.grid.empty()) c.grid.cells = o.grid;
    if (!o.intervals.empty()) c.intervals = cli_intervals(o);
    if (!o.p.empty()) {
        c.warnings.clear();
        c.p = quantize_p_list(c.model, o.p, c.warnings);
    }
    for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
    return c;
}

// Values on the grid nodes, rows along x2.
GridDump node_dump(const Grid& grid, const std::function<double(std::size_t)>& f) {
    GridDump d;
    d.cols = static_cast<std::uint64_t>(grid.extents()[0]);
    d.rows = static_cast<std::uint64_t>(grid.extents()[1]);
    d.values.resize(grid.node_count());
    for (std::size_t k = 0; k < grid.node_count(); ++k) d.values[k] = f(k);
    return d;
}

int cmd_predict(const Options& o) {
    const ExperimentConfig c = load(o);
    const PredictionCache pc = compute_predictions(c);
    const int n = c.model.half_dimension();
    ordered_json j;
    j["name"] = c.name;
    j["prediction_hash"] = pc.hash;
    for (const auto& b : pc.bands.bands) {
        j["bands"].push_back({{"k", b.k.str()}, {"lo", b.lo}, {"hi", b.hi}});
        std::cout << "band k=" << b.k.str() << " [" << b.lo << ", " << b.hi << "]\n";
    }
    j["gaps"] = ordered_json::array();
    for (const auto& g : pc.bands.gaps) {
        j["gaps"].push_back({g.lo, g.hi});
        std::cout << "gap (" << g.lo << ", " << g.hi << ")\n";
    }
    for (int p : c.p) {
        ordered_json row{{"p", p}};
        const double scale = std::pow(p / (2.0 * std::numbers::pi), n);
        for (std::size_t i = 0; i < c.intervals.size(); ++i) {
            const double N = scale * pc.weyl_measure_sum[i];
            row["weyl"].push_back({{"interval", {c.intervals[i].lo, c.intervals[i].hi}}, {"count", N}});
            std::cout << "p=" << p << " N_pred[" << c.intervals[i].lo << ", " << c.intervals[i].hi << "] = " << N << '\n';
        }
        for (std::size_t i = 0; i < c.phi.size(); ++i) {
            const double t = std::pow(static_cast<double>(p), n) * pc.f0[i];
            row["trace"].push_back({{"support", {c.phi[i].lo, c.phi[i].hi}}, {"value", t}});
            std::cout << "p=" << p << " trace_pred[" << c.phi[i].lo << ", " << c.phi[i].hi << "] = " << t << '\n';
        }
        j["p"].push_back(row);
    }
    // Distance to K for each interval on the predictor grid.
    const Grid grid(c.model.domain, std::vector<int>(c.model.domain.lengths.size(), c.predictor_cells));
    const FieldSamples samples = sample_fields(c.model, grid);
    const fs::path dir = out_dir(o, c);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < c.intervals.size(); ++i) {
        const KSetField K = k_set(samples, c.intervals[i]);
        const fs::path file = dir / (c.name + "_kset" + std::to_string(i) + ".bin");
        write_grid_dump(file, node_dump(grid, [&](std::size_t k) { return K.distance[k]; }));
        j["kset"].push_back({{"interval", {c.intervals[i].lo, c.intervals[i].hi}},
                             {"empty", K.empty},
                             {"distance_dump", file.filename().string()}});
    }
    write_json(dir / (c.name + "_predict.json"), j);
    return 0;
}

int cmd_assemble(const Options& o) {
    const ExperimentConfig c = load(o);
    const fs::path dir = out_dir(o, c);
    fs::create_directories(dir);
    for (int p : c.p) {
        const Grid grid = grid_for(c, p);
        const GaugeData gauge = build_gauge(c.model, grid, p);
        const SparseHermitian H = assemble(c.model, grid, p, gauge);
        const std::string stem = c.name + "_p" + std::to_string(p);
        export_matrix_market(H, dir / (stem + ".mtx"));
        write_grid_dump(dir / (stem + "_b.bin"), node_dump(grid, [&](std::size_t k) {
                            const auto x = grid.coords(k);
                            return c.model.two_form_is_density ? c.model.density_at(x) : c.model.two_form_at(x)(0, 1);
                        }));
        write_grid_dump(dir / (stem + "_V.bin"),
                        node_dump(grid, [&](std::size_t k) { return c.model.potential_at(grid.coords(k)); }));
        std::cout << "p=" << p << " cells " << grid.cells()[0] << "x" << grid.cells()[1] << " unknowns " << H.size()
                  << " nonzeros " << H.nonzeros() << " plaquette defect " << plaquette_defect(c.model, gauge)
                  << " -> " << (dir / (stem + ".mtx")).string() << '\n';
    }
    return 0;
}

struct Built {
    Grid grid;
    SparseHermitian H;
};

Built build(const ExperimentConfig& c, int p) {
    const Grid grid = grid_for(c, p);
    const GaugeData gauge = build_gauge(c.model, grid, p);
    return {grid, assemble(c.model, grid, p, gauge)};
}

SpectralOptions options_for(const ExperimentConfig& c) {
    SpectralOptions s;
    s.seed = c.seed;
    s.residual_tolerance = c.tolerances.residual;
    s.trace_tolerance = c.tolerances.trace_relative;
    return s;
}

int count_matrix(const Options& o) {
    const SparseHermitian H = import_matrix_market(o.matrix);
    const auto intervals = cli_intervals(o);
    if (intervals.empty()) throw ConfigError("count --matrix needs --interval lo:hi");
    Slicer slicer(H);
    ordered_json j;
    for (const auto& iv : intervals) {
        const SpectralSlice s = count_interval(slicer, iv);
        j["counts"].push_back({{"interval", {iv.lo, iv.hi}}, {"count", s.count}});
        std::cout << "N[" << iv.lo << ", " << iv.hi << "] = " << s.count << '\n';
    }
    if (!o.out.empty()) write_json(fs::path(o.out) / (fs::path(o.matrix).stem().string() + "_count.json"), j);
    return 0;
}

int eigs_matrix(const Options& o) {
    const SparseHermitian H = import_matrix_market(o.matrix);
    const auto intervals = cli_intervals(o);
    if (intervals.empty()) throw ConfigError("eigs --matrix needs --interval lo:hi");
    Slicer slicer(H);
    ordered_json j;
    for (const auto& iv : intervals) {
        const SpectralSlice s = eigenpairs_in_interval(slicer, iv, o.max_m);
        ordered_json e{{"interval", {iv.lo, iv.hi}}, {"count", s.count}, {"worst_residual", s.worst_residual}};
        e["eigenvalues"] = ordered_json::array();
        for (const auto& pr : s.pairs) {
            e["eigenvalues"].push_back(pr.value);
            std::cout << std::setprecision(15) << pr.value << '\n';
        }
        j["slices"].push_back(e);
    }
    if (!o.out.empty()) write_json(fs::path(o.out) / (fs::path(o.matrix).stem().string() + "_eigs.json"), j);
    return 0;
}

int cmd_count(const Options& o) {
    if (!o.matrix.empty()) return count_matrix(o);
    const ExperimentConfig c = load(o);
    if (c.intervals.empty()) throw ConfigError("count needs at least one interval");
    ordered_json j;
    for (int p : c.p) {
        const Built b = build(c, p);
        Slicer slicer(b.H, options_for(c));
        for (const auto& iv : c.intervals) {
            const SpectralSlice s = count_interval(slicer, iv);
            ordered_json shifts = ordered_json::array();
            for (const auto& r : s.shift_log)
                shifts.push_back({{"requested", r.requested}, {"used", r.used}, {"retries", r.retries}});
            j["counts"].push_back({{"p", p}, {"interval", {iv.lo, iv.hi}}, {"count", s.count}, {"shifts", shifts}});
            std::cout << "p=" << p << " N[" << iv.lo << ", " << iv.hi << "] = " << s.count << '\n';
        }
    }
    write_json(out_dir(o, c) / (c.name + "_count.json"), j);
    return 0;
}

int cmd_eigs(const Options& o) {
    if (!o.matrix.empty()) return eigs_matrix(o);
    const ExperimentConfig c = load(o);
    if (c.intervals.empty()) throw ConfigError("eigs needs at least one interval");
    const fs::path dir = out_dir(o, c);
    ordered_json j;
    for (int p : c.p) {
        const Built b = build(c, p);
        Slicer slicer(b.H, options_for(c));
        for (std::size_t i = 0; i < c.intervals.size(); ++i) {
            const auto& iv = c.intervals[i];
            const SpectralSlice s = eigenpairs_in_interval(slicer, iv, o.max_m);
            ordered_json e{{"p", p}, {"interval", {iv.lo, iv.hi}}, {"count", s.count},
                           {"worst_residual", s.worst_residual}, {"orthogonality_defect", s.orthogonality_defect}};
            for (const auto& pr : s.pairs) e["eigenvalues"].push_back(pr.value);
            for (const auto& pr : s.pairs) e["residuals"].push_back(pr.residual);
            j["slices"].push_back(e);
            std::cout << "p=" << p << " [" << iv.lo << ", " << iv.hi << "]: " << s.count << " eigenpairs, residual <= "
                      << s.worst_residual << '\n';
            if (o.densities) {
                const auto nodes = unknown_nodes(b.grid);
                fs::create_directories(dir);
                for (std::size_t k = 0; k < s.pairs.size(); ++k) {
                    GridDump d = node_dump(b.grid, [](std::size_t) { return 0.0; });
                    for (std::size_t u = 0; u < nodes.size(); ++u)
                        d.values[nodes[u]] = std::norm(s.pairs[k].vector(static_cast<Eigen::Index>(u)));
                    write_grid_dump(dir / (c.name + "_p" + std::to_string(p) + "_i" + std::to_string(i) + "_u" +
                                           std::to_string(k) + ".bin"),
                                    d);
                }
            }
        }
    }
    write_json(dir / (c.name + "_eigs.json"), j);
    return 0;
}

int cmd_trace(const Options& o) {
    const ExperimentConfig c = load(o);
    if (c.phi.empty()) throw ConfigError("trace needs at least one test function (phi)");
    ordered_json j;
    for (int p : c.p) {
        const Built b = build(c, p);
        Slicer slicer(b.H, options_for(c));
        for (const auto& iv : c.phi) {
            const TraceResult t = trace_phi(slicer, TestFunction(iv));
            j["traces"].push_back({{"p", p},
                                   {"support", {iv.lo, iv.hi}},
                                   {"value", t.value},
                                   {"method", t.method},
                                   {"count", t.count},
                                   {"error_bound", t.error_bound}});
            std::cout << "p=" << p << " tr phi[" << iv.lo << ", " << iv.hi << "] = " << t.value << " (" << t.method << ", "
                      << t.count << " eigenvalues)\n";
        }
    }
    write_json(out_dir(o, c) / (c.name + "_trace.json"), j);
    return 0;
}

void print_report(const ExperimentReport& rep) {
    for (const auto& r : rep.rows) {
        std::cout << "p=" << r.p;
        if (!r.complete) std::cout << " INCOMPLETE: " << r.failure;
        for (const auto& iv : r.intervals) std::cout << " N=" << iv.measured << " pred=" << iv.predicted << " ratio=" << iv.ratio;
        for (const auto& t : r.traces) std::cout << " tr=" << t.measured << " pred=" << t.predicted;
        if (r.cluster_distance >= 0.0) std::cout << " cluster=" << r.cluster_distance;
        if (r.localization) std::cout << " gap_count=" << r.localization->count << " rate=" << r.localization->aggregate_rate;
        for (const auto& d : r.ldos) std::cout << " ldos_dev=" << d.relative_deviation;
        std::cout << '\n';
    }
    for (const auto& f : rep.fits)
        std::cout << f.quantity << ": exponent " << f.fit.exponent << " [" << f.fit.ci_lo << ", " << f.fit.ci_hi
                  << "] R2 " << f.fit.r2 << (f.fit.degenerate ? " (floored)" : "") << '\n';
}

int cmd_sweep(const Options& o) {
    const ExperimentConfig c = load(o);
    const ExperimentReport rep = run_sweep(c);
    print_report(rep);
    write_report(rep, out_dir(o, c), c.name);
    std::cout << "wrote " << (out_dir(o, c) / (c.name + ".json")).string() << '\n';
    return rep.complete ? 0 : 3;
}

int cmd_ldos(const Options& o) {
    const ExperimentConfig c = load(o);
    if (c.ldos_points.empty()) throw ConfigError("ldos needs points in the ldos block");
    const ExperimentReport rep = ldos_check(c, c.ldos_points);
    print_report(rep);
    write_report(rep, out_dir(o, c), c.name + "_ldos");
    return rep.complete ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnetic Schroedinger operators on flat tori and rectangles"};
    app.require_subcommand(1);
    Options o;
    auto add = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("-o,--out", o.out, "output directory (default: the config's output.dir)");
        sub->add_option("-p,--p", o.p, "override the config's p list");
        sub->add_option("--grid", o.grid, "fixed cell counts, one per axis")->expected(2);
        sub->add_option("--interval", o.intervals, "energy interval lo:hi (repeatable)");
        return sub;
    };
    auto add_matrix = [&](CLI::App* sub) {
        sub->add_option("--matrix", o.matrix, "Matrix Market file instead of a config")->check(CLI::ExistingFile);
        return sub;
    };
    add("predict", "Landau bands, gaps, Weyl counts and trace predictions");
    add("assemble", "write H_p as Matrix Market plus grid dumps of b and V");
    add_matrix(add("count", "eigenvalue counts by inertia"));
    CLI::App* eigs = add_matrix(add("eigs", "eigenpairs in the configured intervals"));
    eigs->add_flag("--densities", o.densities, "dump |u|^2 of every eigenvector as a grid file");
    eigs->add_option("--max-m", o.max_m, "largest number of eigenpairs accepted per interval");
    add("trace", "tr phi(H_p) for the configured test functions");
    add("sweep", "run every configured check and write JSON/CSV reports");
    add("ldos", "local density of states against the local prediction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "predict") return cmd_predict(o);
        if (cmd == "assemble") return cmd_assemble(o);
        if (cmd == "count") return cmd_count(o);
        if (cmd == "eigs") return cmd_eigs(o);
        if (cmd == "trace") return cmd_trace(o);
        if (cmd == "sweep") return cmd_sweep(o);
        if (cmd == "ldos") return cmd_ldos(o);
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
