#include "landau/harness.hpp"

#include "landau/discretize.hpp"
#include "landau/errors.hpp"
#include "landau/stats.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#ifndef LANDAU_VERSION
#define LANDAU_VERSION "unknown"
#endif

namespace landau {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::set<std::string> kChecks{"weyl", "trace", "cluster", "localization", "ldos"};

void reject_unknown(const ordered_json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key())) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(std::string("missing \"") + key + "\" in " + where);
    return obj.at(key);
}

// A number, or a string holding a constant expression.
double scalar(const ordered_json& v, const SymbolTable& symbols, const std::string& what) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) throw ConfigError(what + " must be a number or an expression string");
    const Expression e = Expression::parse(v.get<std::string>(), symbols);
    if (!e.is_constant()) throw ConfigError(what + " must not depend on the coordinates");
    const std::vector<double> origin(static_cast<std::size_t>(std::max(symbols.dimension, 1)), 0.0);
    const double x = e(origin);
    if (!std::isfinite(x)) throw ConfigError(what + " is not finite");
    return x;
}

Expression field(const ordered_json& v, const SymbolTable& symbols, const std::string& what) {
    if (v.is_number()) return Expression::constant(v.get<double>());
    if (!v.is_string()) throw ConfigError(what + " must be a number or an expression string");
    return Expression::parse(v.get<std::string>(), symbols);
}

Interval interval_of(const ordered_json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError(what + " must be a pair [lo, hi]");
    Interval iv{v[0].get<double>(), v[1].get<double>()};
    if (!(iv.lo < iv.hi)) throw ConfigError(what + " must satisfy lo < hi");
    return iv;
}

std::vector<Interval> intervals_of(const ordered_json& v, const std::string& what) {
    if (!v.is_array()) throw ConfigError(what + " must be a list of [lo, hi] pairs");
    std::vector<Interval> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(interval_of(v[i], what + "[" + std::to_string(i) + "]"));
    return out;
}

ModelSpec parse_model(const ordered_json& m) {
    reject_unknown(m, {"domain", "constants", "b", "two_form", "metric", "potential", "b0"}, "model");
    const ordered_json& dom = require(m, "domain", "model");
    reject_unknown(dom, {"type", "lengths", "origin"}, "model.domain");
    const std::string type = require(dom, "type", "model.domain").get<std::string>();
    const ordered_json& lengths = require(dom, "lengths", "model.domain");
    if (!lengths.is_array() || lengths.empty()) throw ConfigError("model.domain.lengths must be a non-empty list");

    ModelSpec spec;
    spec.symbols.dimension = static_cast<int>(lengths.size());
    if (m.contains("constants")) {
        if (!m["constants"].is_object()) throw ConfigError("model.constants must be an object");
        for (const auto& item : m["constants"].items())
            spec.symbols.constants[item.key()] = scalar(item.value(), spec.symbols, "constant " + item.key());
    }
    if (type == "torus") spec.domain.kind = DomainKind::Torus;
    else if (type == "rectangle") spec.domain.kind = DomainKind::Rectangle;
    else throw ConfigError("model.domain.type must be \"torus\" or \"rectangle\"");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double L = scalar(lengths[i], spec.symbols, "side length");
        if (!(L > 0.0)) throw ConfigError("side lengths must be positive");
        spec.domain.lengths.push_back(L);
    }
    spec.domain.origin.assign(lengths.size(), 0.0);
    if (dom.contains("origin")) {
        const auto& o = dom["origin"];
        if (!o.is_array() || o.size() != lengths.size()) throw ConfigError("model.domain.origin must match lengths");
        for (std::size_t i = 0; i < o.size(); ++i) spec.domain.origin[i] = scalar(o[i], spec.symbols, "origin");
    }
    if (spec.dimension() % 2 != 0) throw ConfigError("the dimension must be even");

    if (m.contains("b") == m.contains("two_form")) throw ConfigError("model needs exactly one of \"b\" and \"two_form\"");
    if (m.contains("b")) {
        if (spec.dimension() != 2) throw ConfigError("a scalar field b needs a two-dimensional domain");
        spec.two_form = {field(m["b"], spec.symbols, "b")};
        spec.two_form_is_density = true;
    } else {
        const auto& tf = m["two_form"];
        const std::size_t d = lengths.size();
        if (!tf.is_array() || tf.size() != d * (d - 1) / 2)
            throw ConfigError("two_form must list the strict upper triangle row by row");
        for (const auto& e : tf) spec.two_form.push_back(field(e, spec.symbols, "two_form entry"));
    }
    if (m.contains("metric")) {
        const auto& g = m["metric"];
        const std::size_t d = lengths.size();
        if (!g.is_array() || g.size() != d * (d + 1) / 2)
            throw ConfigError("metric must list the upper triangle (diagonal included) row by row");
        for (const auto& e : g) spec.metric.push_back(field(e, spec.symbols, "metric entry"));
    }
    if (m.contains("potential")) spec.potential = field(m["potential"], spec.symbols, "potential");
    spec.b0 = scalar(require(m, "b0", "model"), spec.symbols, "b0");
    if (!(spec.b0 > 0.0)) throw ConfigError("b0 must be positive");
    return spec;
}

double max_hi(const ExperimentConfig& c) {
    double k = c.wants("cluster") ? c.cluster_k_max : 0.0;
    for (const auto& iv : c.intervals) k = std::max(k, iv.hi);
    for (const auto& iv : c.phi) k = std::max(k, iv.hi);
    if (c.localization) k = std::max(k, c.localization->interval.hi);
    return k;
}

SpectralOptions spectral_options(const ExperimentConfig& c) {
    SpectralOptions o;
    o.seed = c.seed;
    o.residual_tolerance = c.tolerances.residual;
    o.trace_tolerance = c.tolerances.trace_relative;
    return o;
}

double relative(double measured, double predicted) {
    const double diff = std::fabs(measured - predicted);
    return predicted != 0.0 ? diff / std::fabs(predicted) : diff;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Nearest unknown of an assembled operator to a point.
std::size_t nearest_unknown(const std::vector<std::array<double, 2>>& xy, const std::array<double, 2>& x) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < xy.size(); ++u) {
        const double d = std::hypot(xy[u][0] - x[0], xy[u][1] - x[1]);
        if (d < bd) {
            bd = d;
            best = u;
        }
    }
    return best;
}

struct Assembled {
    Grid grid;
    SparseHermitian H;
};

Assembled assemble_for(const ModelSpec& model, const Grid& grid, int p) {
    const GaugeData gauge = build_gauge(model, grid, p);
    return {grid, assemble(model, grid, p, gauge)};
}

void run_weyl(const ExperimentConfig& c, const PredictionCache& pc, Slicer& slicer, SweepRow& row) {
    for (std::size_t i = 0; i < c.intervals.size(); ++i) {
        IntervalRow r;
        r.interval = c.intervals[i];
        r.measured = count_interval(slicer, r.interval).count;
        r.predicted = std::pow(row.p / kTwoPi, c.model.half_dimension()) * pc.weyl_measure_sum[i];
        if (r.predicted > 0.0) r.ratio = static_cast<double>(r.measured) / r.predicted;
        else if (r.measured == 0) r.ratio = 1.0;
        else {
            r.ratio = 0.0;
            row.complete = false;
            row.failure = "Weyl prediction vanishes on an interval holding eigenvalues";
        }
        row.intervals.push_back(r);
    }
}

void run_trace(const ExperimentConfig& c, const PredictionCache& pc, Slicer& slicer, SweepRow& row) {
    for (std::size_t i = 0; i < c.phi.size(); ++i) {
        const TestFunction phi(c.phi[i]);
        const TraceResult t = trace_phi(slicer, phi);
        TraceRow r;
        r.support = c.phi[i];
        r.measured = t.value;
        r.predicted = std::pow(static_cast<double>(row.p), c.model.half_dimension()) * pc.f0[i];
        r.relative_residual = relative(r.measured, r.predicted);
        r.method = t.method;
        r.count = t.count;
        row.traces.push_back(r);
    }
}

// Eigenvalues are only needed where they could lie off the bands: below the
// lowest band and inside the gaps. Everything else contributes distance zero.
void run_cluster(const ExperimentConfig& c, const PredictionCache& pc, const SparseHermitian& H, Slicer& slicer,
                 SweepRow& row) {
    // Nothing lies below the Gershgorin bound.
    const double lo = std::min(0.0, H.gershgorin_lower()) - 1e-6;
    row.cluster_count = count_interval(slicer, {lo, c.cluster_k_max}).count;
    std::vector<Interval> off;
    const double first = pc.bands.min_level();
    if (first > lo) off.push_back({lo, std::min(first, c.cluster_k_max)});
    for (const auto& g : pc.bands.gaps)
        if (g.lo < c.cluster_k_max) off.push_back({g.lo, std::min(g.hi, c.cluster_k_max)});
    std::vector<double> values;
    for (const auto& iv : off) {
        if (!(iv.lo < iv.hi)) continue;
        const SpectralSlice s = eigenpairs_in_interval(slicer, iv, c.cluster_max_states);
        for (const auto& pr : s.pairs) values.push_back(pr.value);
        row.worst_residual = std::max(row.worst_residual, s.worst_residual);
    }
    row.cluster_distance = cluster_distance(values, pc.bands, c.cluster_k_max);
}

void run_localization(const ExperimentConfig& c, const Assembled& a, double sup_b, Slicer& slicer, SweepRow& row) {
    const LocalizationCheck& lc = *c.localization;
    const SpectralSlice s = eigenpairs_in_interval(slicer, lc.interval, lc.max_states);
    row.worst_residual = std::max(row.worst_residual, s.worst_residual);
    const FieldSamples samples = sample_fields(c.model, a.grid);
    const KSetField K = k_set(samples, lc.interval);
    if (!a.grid.periodic() && !K.empty) {
        // Gap states must not feel the Dirichlet wall: keep K at least five
        // magnetic lengths (sup b)^(-1/2) inside the box.
        const auto& dom = c.model.domain;
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K.inside.size(); ++k) {
            if (!K.inside[k]) continue;
            const auto x = a.grid.coords(k);
            for (std::size_t i = 0; i < x.size(); ++i)
                margin = std::min({margin, x[i] - dom.origin[i], dom.origin[i] + dom.lengths[i] - x[i]});
        }
        if (margin < 5.0 / std::sqrt(sup_b))
            throw ConfigError("K lies within five magnetic lengths of the Dirichlet boundary; enlarge the domain");
    }
    const auto nodes = unknown_nodes(a.grid);
    std::vector<double> distance(nodes.size());
    for (std::size_t u = 0; u < nodes.size(); ++u) distance[u] = K.distance[nodes[u]];
    const LocalizationReport rep = localization_metrics(s.pairs, distance, row.p, lc.options);

    LocalizationRow r;
    r.count = s.count;
    r.aggregate_rate = rep.aggregate.rate;
    r.aggregate_c_hat = rep.aggregate.c_hat;
    r.aggregate_r2 = rep.aggregate.fit_r2;
    r.excluded_mass = rep.aggregate.excluded_mass;
    std::vector<double> rates;
    for (const auto& st : rep.states) {
        rates.push_back(st.rate);
        r.eigenvalues.push_back(st.eigenvalue);
    }
    r.median_rate = median(rates);
    if (!rates.empty()) {
        r.min_rate = *std::min_element(rates.begin(), rates.end());
        r.max_rate = *std::max_element(rates.begin(), rates.end());
    }
    if (!lc.enlarged_lengths.empty()) {
        ModelSpec big = c.model;
        for (std::size_t i = 0; i < big.domain.lengths.size(); ++i) {
            big.domain.origin[i] -= 0.5 * (lc.enlarged_lengths[i] - big.domain.lengths[i]);
            big.domain.lengths[i] = lc.enlarged_lengths[i];
        }
        ExperimentConfig bc = c;
        bc.model = big;
        if (!bc.grid.cells.empty())
            for (std::size_t i = 0; i < bc.grid.cells.size(); ++i)
                bc.grid.cells[i] = static_cast<int>(std::ceil(bc.grid.cells[i] * big.domain.lengths[i] / c.model.domain.lengths[i]));
        const Assembled ab = assemble_for(big, grid_for(bc, row.p), row.p);
        Slicer bs(ab.H, spectral_options(c));
        r.enlarged_count = count_interval(bs, lc.interval).count;
    }
    row.localization = r;
}

void run_ldos(const ExperimentConfig& c, const Assembled& a, Slicer& slicer,
              const std::vector<std::array<double, 2>>& points, SweepRow& row) {
    if (c.phi.empty()) throw ConfigError("the ldos check needs a test function (phi)");
    const TestFunction phi(c.phi.front());
    const SpectralSlice s = eigenpairs_in_interval(slicer, phi.support(), 100000);
    row.worst_residual = std::max(row.worst_residual, s.worst_residual);
    const FieldSamples samples = sample_fields(c.model, a.grid);
    const auto nodes = unknown_nodes(a.grid);
    const auto xy = unknown_coordinates(a.grid);
    const double cell = a.grid.cell_volume();
    const double pn = std::pow(static_cast<double>(row.p), c.model.half_dimension());

    // K_phi(x, x) = sum_j phi(lambda_j) |u_j(x)|^2 with u_j normalized in L^2,
    // i.e. the l^2-normalized lattice vector divided by the cell volume.
    std::vector<double> weights;
    for (const auto& pr : s.pairs) weights.push_back(phi(pr.value));
    auto kernel = [&](std::size_t u) {
        return pairwise_sum(s.pairs.size(), [&](std::size_t j) {
                   return weights[j] * std::norm(s.pairs[j].vector(static_cast<Eigen::Index>(u)));
               }) / cell;
    };
    for (const auto& x : points) {
        LdosRow r;
        r.point = x;
        const std::size_t u = nearest_unknown(xy, x);
        r.node = xy[u];
        r.measured = kernel(u) / pn;
        r.predicted = local_f0(samples, phi, nodes[u]);
        r.relative_deviation = relative(r.measured, r.predicted);
        row.ldos.push_back(r);
    }
    const double total = pairwise_sum(weights.size(), [&](std::size_t j) { return weights[j]; });
    row.ldos_average_measured = total / (cell * static_cast<double>(nodes.size())) / pn;
    row.ldos_average_predicted =
        pairwise_sum(nodes.size(), [&](std::size_t u) { return local_f0(samples, phi, nodes[u]); }) /
        static_cast<double>(nodes.size());
}

SweepRow run_row(const ExperimentConfig& c, const PredictionCache& pc, int p,
                 const std::vector<std::array<double, 2>>& ldos_points, bool ldos_only) {
    SweepRow row;
    row.p = p;
    const auto start = std::chrono::steady_clock::now();
    try {
        const Grid grid = grid_for(c, p);
        row.cells = grid.cells();
        const Assembled a = assemble_for(c.model, grid, p);
        row.unknowns = a.H.size();
        Slicer slicer(a.H, spectral_options(c));
        if (!ldos_only) {
            if (c.wants("weyl")) run_weyl(c, pc, slicer, row);
            if (c.wants("trace")) run_trace(c, pc, slicer, row);
            if (c.wants("cluster")) run_cluster(c, pc, a.H, slicer, row);
            if (c.wants("localization") && c.localization) run_localization(c, a, pc.sup_b, slicer, row);
        }
        if (ldos_only || c.wants("ldos")) run_ldos(c, a, slicer, ldos_points, row);
    } catch (const Error& e) {
        row.complete = false;
        row.failure = e.what();
    } catch (const std::bad_alloc&) {
        row.complete = false;
        row.failure = "out of memory";
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

void add_fit(ExperimentReport& rep, const std::string& name, const std::vector<double>& xs,
             const std::vector<double>& ys, double floor, double confidence) {
    if (xs.size() < 3) return;
    rep.fits.push_back({name, fit_power_law_floored(xs, ys, floor, confidence)});
}

void summarize(const ExperimentConfig& c, ExperimentReport& rep) {
    std::vector<const SweepRow*> done;
    for (const auto& r : rep.rows) {
        if (r.complete) done.push_back(&r);
        else rep.complete = false;
    }
    std::vector<double> ps;
    for (const auto* r : done) ps.push_back(r->p);
    const double conf = c.tolerances.fit_confidence;

    for (std::size_t i = 0; i < c.intervals.size(); ++i) {
        std::vector<double> xs, ys;
        double floor = std::numeric_limits<double>::infinity();
        for (const auto* r : done) {
            if (i >= r->intervals.size() || r->intervals[i].predicted <= 0.0) continue;
            xs.push_back(r->p);
            ys.push_back(std::fabs(r->intervals[i].ratio - 1.0));
            // One eigenvalue of count resolution, halved.
            floor = std::min(floor, 0.5 / r->intervals[i].predicted);
        }
        add_fit(rep, "weyl_residual[" + std::to_string(i) + "]", xs, ys, floor, conf);
    }
    for (std::size_t i = 0; i < c.phi.size(); ++i) {
        std::vector<double> xs, ys;
        for (const auto* r : done)
            if (i < r->traces.size()) {
                xs.push_back(r->p);
                ys.push_back(r->traces[i].relative_residual);
            }
        add_fit(rep, "trace_residual[" + std::to_string(i) + "]", xs, ys, c.tolerances.trace_relative, conf);
    }
    {
        std::vector<double> xs, ys;
        for (const auto* r : done)
            if (r->cluster_distance >= 0.0) {
                xs.push_back(r->p);
                ys.push_back(r->cluster_distance);
            }
        // Eigenvalues are known to within the residual bound.
        add_fit(rep, "cluster_distance", xs, ys, c.tolerances.residual, conf);
    }
    {
        std::vector<double> xs, ys;
        for (const auto* r : done)
            if (r->localization && r->localization->aggregate_rate > 0.0) {
                xs.push_back(r->p);
                ys.push_back(r->localization->aggregate_rate);
            }
        add_fit(rep, "localization_rate", xs, ys, 0.0, conf);
    }
    if (!done.empty()) {
        const std::size_t points = done.front()->ldos.size();
        for (std::size_t j = 0; j < points; ++j) {
            std::vector<double> xs, ys;
            for (const auto* r : done)
                if (j < r->ldos.size()) {
                    xs.push_back(r->p);
                    ys.push_back(r->ldos[j].relative_deviation);
                }
            add_fit(rep, "ldos_deviation[" + std::to_string(j) + "]", xs, ys, 1e-12, conf);
        }
    }

    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    auto note = [&](long count, int p) {
        const double v = static_cast<double>(count) / std::pow(static_cast<double>(p), c.model.half_dimension());
        hi = std::max(hi, v);
        if (count > 0) lo = std::min(lo, v);
    };
    for (const auto* r : done) {
        for (const auto& iv : r->intervals) note(iv.measured, r->p);
        if (r->localization) note(r->localization->count, r->p);
    }
    rep.max_count_per_p = hi;
    rep.min_count_per_p = std::isfinite(lo) ? lo : 0.0;
}

ExperimentReport sweep(const ExperimentConfig& c, const std::vector<std::array<double, 2>>& points, bool ldos_only) {
    ExperimentReport rep;
    rep.name = c.name;
    rep.config_hash = fnv1a_hex(c.source.dump());
    rep.warnings = c.warnings;
    rep.predictions = compute_predictions(c);
    rep.prediction_hash = rep.predictions.hash;
    rep.rows.resize(c.p.size());

    const int threads = std::max(1, std::min<int>(worker_threads(), static_cast<int>(c.p.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < c.p.size(); i = next++)
            rep.rows[i] = run_row(c, rep.predictions, c.p[i], points, ldos_only);
    };
    if (threads == 1) work();
    else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    std::sort(rep.rows.begin(), rep.rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.p < b.p; });
    summarize(c, rep);
    return rep;
}

ordered_json fit_json(const PowerLawFit& f) {
    ordered_json j;
    j["exponent"] = f.exponent;
    j["intercept"] = f.intercept;
    j["r2"] = f.r2;
    j["ci"] = {f.ci_lo, f.ci_hi};
    j["confidence"] = f.confidence;
    j["points"] = f.points;
    j["degenerate"] = f.degenerate;
    if (f.degenerate) j["floor"] = f.floor;
    return j;
}

} // namespace

bool ExperimentConfig::wants(const std::string& check) const {
    return std::find(checks.begin(), checks.end(), check) != checks.end();
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<int> quantize_p_list(const ModelSpec& model, const std::vector<int>& p, std::vector<std::string>& warnings) {
    if (model.domain.kind != DomainKind::Torus) return p;
    const Grid probe(model.domain, std::vector<int>(static_cast<std::size_t>(model.dimension()), 16));
    std::vector<int> out;
    for (int q : p) {
        int use = q;
        try {
            build_gauge(model, probe, q);
        } catch (const FluxNotQuantized& e) {
            if (e.nearest_admissible_p() < 1)
                throw ConfigError("no flux-quantized tensor power near p = " + std::to_string(q));
            use = static_cast<int>(e.nearest_admissible_p());
            warnings.push_back("p = " + std::to_string(q) + " is not flux-quantized; using p = " + std::to_string(use));
        }
        if (std::find(out.begin(), out.end(), use) == out.end()) out.push_back(use);
        else warnings.push_back("p = " + std::to_string(use) + " listed twice after quantization; kept once");
    }
    std::sort(out.begin(), out.end());
    return out;
}

ExperimentConfig parse_config(const ordered_json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(doc,
                   {"name", "model", "grid", "p", "intervals", "phi", "checks", "cluster", "localization", "ldos",
                    "predictor", "seed", "output", "tolerances"},
                   "config");
    ExperimentConfig c;
    c.source = doc;
    c.name = doc.value("name", std::string("experiment"));
    c.model = parse_model(require(doc, "model", "config"));

    if (doc.contains("grid")) {
        const auto& g = doc["grid"];
        reject_unknown(g, {"cells", "nodes_per_length", "multiple"}, "grid");
        if (g.contains("cells")) {
            c.grid.cells = g["cells"].get<std::vector<int>>();
            if (c.grid.cells.size() != c.model.domain.lengths.size()) throw ConfigError("grid.cells must match the dimension");
            for (int n : c.grid.cells)
                if (n < 2) throw ConfigError("grid.cells must be at least 2");
        }
        c.grid.nodes_per_length = g.value("nodes_per_length", c.grid.nodes_per_length);
        c.grid.multiple = g.value("multiple", c.grid.multiple);
        if (!(c.grid.nodes_per_length >= 8.0)) throw ConfigError("grid.nodes_per_length below the resolution gate of 8");
        if (c.grid.multiple < 1) throw ConfigError("grid.multiple must be positive");
    }

    std::vector<int> p = require(doc, "p", "config").get<std::vector<int>>();
    if (p.empty()) throw ConfigError("p list is empty");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 1) throw ConfigError("p must be positive");
        if (i > 0 && p[i] <= p[i - 1]) throw ConfigError("p list must be strictly increasing");
    }
    c.p = quantize_p_list(c.model, p, c.warnings);

    if (doc.contains("intervals")) c.intervals = intervals_of(doc["intervals"], "intervals");
    if (doc.contains("phi")) c.phi = intervals_of(doc["phi"], "phi");
    if (doc.contains("checks")) {
        c.checks = doc["checks"].get<std::vector<std::string>>();
        for (const auto& k : c.checks)
            if (!kChecks.count(k)) throw ConfigError("unknown check \"" + k + "\"");
    }
    if (doc.contains("cluster")) {
        const auto& cl = doc["cluster"];
        reject_unknown(cl, {"k_max", "max_states"}, "cluster");
        c.cluster_k_max = cl.value("k_max", c.cluster_k_max);
        c.cluster_max_states = cl.value("max_states", c.cluster_max_states);
    }
    if (doc.contains("localization")) {
        const auto& l = doc["localization"];
        reject_unknown(l, {"interval", "window", "shell_width", "c_ladder", "max_states", "enlarged_lengths"},
                       "localization");
        LocalizationCheck lc;
        lc.interval = interval_of(require(l, "interval", "localization"), "localization.interval");
        if (l.contains("window")) {
            const Interval w = interval_of(l["window"], "localization.window");
            lc.options.window_lo = w.lo;
            lc.options.window_hi = w.hi;
        }
        lc.options.shell_width = l.value("shell_width", lc.options.shell_width);
        if (l.contains("c_ladder")) lc.options.c_ladder = l["c_ladder"].get<std::vector<double>>();
        lc.max_states = l.value("max_states", lc.max_states);
        if (l.contains("enlarged_lengths")) {
            lc.enlarged_lengths = l["enlarged_lengths"].get<std::vector<double>>();
            if (lc.enlarged_lengths.size() != c.model.domain.lengths.size())
                throw ConfigError("localization.enlarged_lengths must match the dimension");
        }
        c.localization = lc;
    }
    if (c.wants("localization") && !c.localization) throw ConfigError("the localization check needs a localization block");
    if (doc.contains("ldos")) {
        const auto& l = doc["ldos"];
        reject_unknown(l, {"points"}, "ldos");
        for (const auto& pt : require(l, "points", "ldos")) {
            if (!pt.is_array() || pt.size() != 2) throw ConfigError("ldos points are [x1, x2] pairs");
            c.ldos_points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
    }
    if (c.wants("ldos") && c.phi.empty()) throw ConfigError("the ldos check needs a test function (phi)");
    if (doc.contains("predictor")) {
        reject_unknown(doc["predictor"], {"cells"}, "predictor");
        c.predictor_cells = doc["predictor"].value("cells", c.predictor_cells);
        if (c.predictor_cells < 8) throw ConfigError("predictor.cells must be at least 8");
    }
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("output")) {
        reject_unknown(doc["output"], {"dir"}, "output");
        c.output_dir = doc["output"].value("dir", c.output_dir);
    }
    if (doc.contains("tolerances")) {
        const auto& t = doc["tolerances"];
        Tolerances& tol = c.tolerances;
        const std::pair<const char*, double*> names[] = {
            {"weyl_ratio", &tol.weyl_ratio},
            {"trace_exponent", &tol.trace_exponent},
            {"cluster_exponent", &tol.cluster_exponent},
            {"cluster_r2", &tol.cluster_r2},
            {"localization_ratio_lo", &tol.localization_ratio_lo},
            {"localization_ratio_hi", &tol.localization_ratio_hi},
            {"gauge_relative", &tol.gauge_relative},
            {"upper_bound_spread", &tol.upper_bound_spread},
            {"ldos_average", &tol.ldos_average},
            {"residual", &tol.residual},
            {"trace_relative", &tol.trace_relative},
            {"fit_confidence", &tol.fit_confidence},
        };
        std::set<std::string> allowed;
        for (const auto& [name, ptr] : names) {
            allowed.insert(name);
            if (t.contains(name)) *ptr = t[name].get<double>();
        }
        reject_unknown(t, allowed, "tolerances");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config " + file.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

PowerLawFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys, double confidence) {
    if (xs.size() != ys.size()) throw ConfigError("fit needs as many y values as x values");
    if (xs.size() < 3) throw ConfigError("power-law fit needs at least three points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0)) throw ConfigError("power-law fit needs positive x");
        if (ys[i] < 0.0 || !std::isfinite(ys[i])) throw ConfigError("power-law fit needs finite y >= 0");
        if (ys[i] == 0.0) throw DegenerateFit("power-law fit hit y = 0 at x = " + std::to_string(xs[i]));
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    const LinearFit lf = linear_fit(lx, ly);
    PowerLawFit f;
    f.exponent = lf.slope;
    f.intercept = lf.intercept;
    f.r2 = lf.r2;
    f.points = lf.points;
    f.confidence = confidence;
    const double t = student_t_quantile(confidence, lf.points - 2);
    f.ci_lo = lf.slope - t * lf.slope_stderr;
    f.ci_hi = lf.slope + t * lf.slope_stderr;
    return f;
}

PowerLawFit fit_power_law_floored(const std::vector<double>& xs, std::vector<double> ys, double floor,
                                  double confidence) {
    bool substituted = false;
    for (double& y : ys)
        if (y == 0.0) {
            y = floor;
            substituted = true;
        }
    PowerLawFit f = fit_power_law(xs, ys, confidence);
    f.degenerate = substituted;
    f.floor = substituted ? floor : 0.0;
    return f;
}

Grid grid_for(const ExperimentConfig& c, int p) {
    if (!c.grid.cells.empty()) return Grid(c.model.domain, c.grid.cells);
    // Start from the sampled supremum of b, then refine until the assembly
    // grid itself passes the gate (its nodes may see a larger field).
    const Grid probe(c.model.domain, std::vector<int>(c.model.domain.lengths.size(), c.predictor_cells));
    double sup = sup_field(c.model, probe);
    for (int attempt = 0; attempt < 8; ++attempt) {
        Grid g(c.model.domain, cells_for_resolution(c.model.domain, p, sup, c.grid.nodes_per_length, c.grid.multiple));
        const double actual = sup_field(c.model, g);
        if (g.resolution_ratio(p, actual) <= 1.0 / 8.0) return g;
        sup = std::max(sup * (1.0 + 1e-9), actual);
    }
    throw ResolutionTooCoarse("no grid met the resolution gate for p = " + std::to_string(p));
}

PredictionCache compute_predictions(const ExperimentConfig& c) {
    PredictionCache pc;
    const Grid grid(c.model.domain, std::vector<int>(c.model.domain.lengths.size(), c.predictor_cells));
    validate_model(c.model, grid);
    const FieldSamples s = sample_fields(c.model, grid);
    pc.sup_b = s.max_frame();
    for (const auto& iv : c.intervals) {
        const WeylPrediction w = weyl_count_prediction(s, iv, 1.0);
        pc.weyl_measure_sum.push_back(w.measure_sum);
        pc.weyl_boundary_warning.push_back(w.boundary_on_level_set);
    }
    for (const auto& iv : c.phi) pc.f0.push_back(f0_pairing(s, TestFunction(iv)));
    pc.bands = sigma_bands(s, {}, std::max(max_hi(c), s.min_potential() + 3.0 * s.min_frame()));

    ordered_json j;
    j["weyl_measure_sum"] = pc.weyl_measure_sum;
    j["f0"] = pc.f0;
    for (const auto& b : pc.bands.bands) j["bands"].push_back({b.k.str(), b.lo, b.hi});
    j["sup_b"] = pc.sup_b;
    pc.hash = fnv1a_hex(j.dump());
    return pc;
}

ExperimentReport run_sweep(const ExperimentConfig& config) { return sweep(config, config.ldos_points, false); }

ExperimentReport ldos_check(const ExperimentConfig& config, const std::vector<std::array<double, 2>>& points) {
    if (config.phi.empty()) throw ConfigError("ldos_check needs a test function (phi)");
    return sweep(config, points, true);
}

int worker_threads() {
    const char* env = std::getenv("LANDAU_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError("LANDAU_THREADS must be a positive integer");
    return static_cast<int>(std::min(n, 256L));
}

ordered_json report_json(const ExperimentReport& rep, const std::string& timestamp) {
    ordered_json j;
    j["name"] = rep.name;
    j["complete"] = rep.complete;
    j["provenance"] = {{"config_hash", rep.config_hash},
                       {"prediction_hash", rep.prediction_hash},
                       {"landau", LANDAU_VERSION},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"compiler", __VERSION__}};
    j["warnings"] = rep.warnings;

    ordered_json pred;
    pred["weyl_measure_sum"] = rep.predictions.weyl_measure_sum;
    pred["weyl_boundary_on_level_set"] = rep.predictions.weyl_boundary_warning;
    pred["f0"] = rep.predictions.f0;
    pred["sup_b"] = rep.predictions.sup_b;
    pred["bands"] = ordered_json::array();
    for (const auto& b : rep.predictions.bands.bands) pred["bands"].push_back({{"k", b.k.str()}, {"lo", b.lo}, {"hi", b.hi}});
    pred["gaps"] = ordered_json::array();
    for (const auto& g : rep.predictions.bands.gaps) pred["gaps"].push_back({g.lo, g.hi});
    j["predictions"] = pred;

    j["rows"] = ordered_json::array();
    for (const auto& r : rep.rows) {
        ordered_json row;
        row["p"] = r.p;
        row["cells"] = r.cells;
        row["unknowns"] = r.unknowns;
        row["complete"] = r.complete;
        if (!r.failure.empty()) row["failure"] = r.failure;
        for (const auto& iv : r.intervals)
            row["counts"].push_back({{"interval", {iv.interval.lo, iv.interval.hi}},
                                     {"measured", iv.measured},
                                     {"predicted", iv.predicted},
                                     {"ratio", iv.ratio}});
        for (const auto& t : r.traces)
            row["traces"].push_back({{"support", {t.support.lo, t.support.hi}},
                                     {"measured", t.measured},
                                     {"predicted", t.predicted},
                                     {"relative_residual", t.relative_residual},
                                     {"method", t.method},
                                     {"count", t.count}});
        if (r.cluster_distance >= 0.0) row["cluster"] = {{"distance", r.cluster_distance}, {"count", r.cluster_count}};
        if (r.localization) {
            const auto& l = *r.localization;
            row["localization"] = {{"count", l.count},
                                   {"enlarged_count", l.enlarged_count},
                                   {"aggregate_rate", l.aggregate_rate},
                                   {"aggregate_c_hat", l.aggregate_c_hat},
                                   {"aggregate_r2", l.aggregate_r2},
                                   {"median_rate", l.median_rate},
                                   {"min_rate", l.min_rate},
                                   {"max_rate", l.max_rate},
                                   {"excluded_mass", l.excluded_mass},
                                   {"eigenvalues", l.eigenvalues}};
        }
        for (const auto& d : r.ldos)
            row["ldos"].push_back({{"point", d.point},
                                   {"node", d.node},
                                   {"measured", d.measured},
                                   {"predicted", d.predicted},
                                   {"relative_deviation", d.relative_deviation}});
        if (!r.ldos.empty())
            row["ldos_average"] = {{"measured", r.ldos_average_measured}, {"predicted", r.ldos_average_predicted}};
        row["worst_residual"] = r.worst_residual;
        j["rows"].push_back(row);
    }
    ordered_json fits = ordered_json::object();
    for (const auto& f : rep.fits) fits[f.quantity] = fit_json(f.fit);
    j["fits"] = fits;
    j["upper_bound"] = {{"max_count_per_p", rep.max_count_per_p}, {"min_count_per_p", rep.min_count_per_p}};

    ordered_json run;
    run["timestamp"] = timestamp;
    for (const auto& r : rep.rows) run["seconds"].push_back({{"p", r.p}, {"seconds", r.seconds}});
    j["run"] = run;
    return j;
}

std::string report_csv(const ExperimentReport& rep) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "p,quantity,lo,hi,measured,predicted,deviation\n";
    for (const auto& r : rep.rows) {
        for (const auto& iv : r.intervals)
            os << r.p << ",count," << iv.interval.lo << ',' << iv.interval.hi << ',' << iv.measured << ','
               << iv.predicted << ',' << iv.ratio - 1.0 << '\n';
        for (const auto& t : r.traces)
            os << r.p << ",trace," << t.support.lo << ',' << t.support.hi << ',' << t.measured << ',' << t.predicted
               << ',' << t.relative_residual << '\n';
        if (r.cluster_distance >= 0.0) os << r.p << ",cluster_distance,,," << r.cluster_distance << ",0," << r.cluster_distance << '\n';
        if (r.localization)
            os << r.p << ",localization_rate,,," << r.localization->aggregate_rate << ",," << '\n';
        for (const auto& d : r.ldos)
            os << r.p << ",ldos," << d.point[0] << ',' << d.point[1] << ',' << d.measured << ',' << d.predicted << ','
               << d.relative_deviation << '\n';
    }
    return os.str();
}

void write_report(const ExperimentReport& rep, const std::filesystem::path& dir, const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    const auto json_path = dir / (stem + ".json");
    std::ofstream js(json_path);
    js << report_json(rep, ts.str()).dump(2) << '\n';
    if (!js) throw IoError("cannot write " + json_path.string());
    const auto csv_path = dir / (stem + ".csv");
    std::ofstream cs(csv_path);
    cs << report_csv(rep);
    if (!cs) throw IoError("cannot write " + csv_path.string());
}

} // namespace landau
