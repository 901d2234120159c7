#include "landau/predictor.hpp"

#include "landau/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>
#include <sstream>

namespace landau {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double pairwise_range(std::size_t begin, std::size_t end, const std::function<double(std::size_t)>& f) {
    constexpr std::size_t kLeaf = 32;
    if (end - begin <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_range(begin, mid, f) + pairwise_range(mid, end, f);
}

bool selected(const NodeMask& region, std::size_t node) {
    return region.empty() || region[node] != 0;
}

int global_max_order(const FieldSamples& s, double k_max) {
    return max_level_order(k_max, s.min_frame(), s.min_potential(), s.n);
}

} // namespace

double pairwise_sum(std::size_t count, const std::function<double(std::size_t)>& f) {
    return pairwise_range(0, count, f);
}

double RefinementCheck::relative_difference() const {
    const double scale = std::max(std::fabs(coarse), std::fabs(fine));
    return scale == 0.0 ? 0.0 : std::fabs(fine - coarse) / scale;
}

// --- multi-indices ----------------------------------------------------------------

int MultiIndex::order() const noexcept {
    int s = 0;
    for (int v : k) s += v;
    return s;
}

std::string MultiIndex::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
    os << ')';
    return os.str();
}

std::vector<MultiIndex> enumerate_multi_indices(int n, int max_order) {
    std::vector<MultiIndex> out;
    if (n <= 0 || max_order < 0) return out;
    std::vector<int> k(static_cast<std::size_t>(n), 0);
    // Compositions of m into n parts, k_1 descending first.
    std::function<void(int, int)> fill = [&](int pos, int remaining) {
        if (pos == n - 1) {
            k[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(MultiIndex{k});
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            k[static_cast<std::size_t>(pos)] = v;
            fill(pos + 1, remaining - v);
        }
    };
    for (int m = 0; m <= max_order; ++m) fill(0, m);
    return out;
}

int max_level_order(double k_max, double min_a, double min_v, int n) {
    if (!(min_a > 0.0)) throw DegenerateField("frame eigenvalues must be positive to bound Landau indices");
    const double bound = ((k_max - min_v) / min_a - n) / 2.0;
    if (bound < 0.0) return -1;
    return static_cast<int>(std::floor(bound + 1e-12));
}

// --- frame eigenvalues and levels ------------------------------------------------------

std::vector<double> frame_eigenvalues(const Eigen::MatrixXd& metric, const Eigen::MatrixXd& two_form) {
    const Eigen::Index d = metric.rows();
    if (d == 0 || d % 2 != 0 || metric.cols() != d || two_form.rows() != d || two_form.cols() != d)
        throw ConfigError("frame_eigenvalues needs square matrices of even size");
    const double scale = two_form.cwiseAbs().maxCoeff();
    if ((two_form + two_form.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(scale, 1e-300))
        throw ConfigError("two-form matrix is not antisymmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(metric);
    if (!(eg.eigenvalues().minCoeff() > 0.0)) throw MetricNotSPD("metric is not positive definite");
    if (d == 2) {
        // Closed form, exact for constant fields.
        const double g11 = metric(0, 0), g12 = 0.5 * (metric(0, 1) + metric(1, 0)), g22 = metric(1, 1);
        const double a = std::fabs(two_form(0, 1)) / std::sqrt(g11 * g22 - g12 * g12);
        if (!(a > 0.0)) throw DegenerateField("degenerate magnetic field: B vanishes");
        return {a};
    }
    const Eigen::MatrixXd gi = eg.operatorInverseSqrt();
    const Eigen::MatrixXd M = gi * two_form * gi;
    const Eigen::MatrixXcd herm = std::complex<double>(0.0, 1.0) * M.cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eb(herm, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = eb.eigenvalues(); // ascending: -a_n..-a_1, a_1..a_n

    const auto n = static_cast<std::size_t>(d / 2);
    std::vector<double> a(n);
    for (std::size_t j = 0; j < n; ++j) a[j] = ev(static_cast<Eigen::Index>(n + j));
    const double amax = a.back();
    if (!(amax > 0.0) || a.front() < 1e-12 * amax) {
        std::ostringstream os;
        os << "degenerate magnetic field: frame eigenvalues range from " << a.front() << " to " << amax;
        throw DegenerateField(os.str());
    }
    return a;
}

double landau_level(std::span<const double> a, double potential, std::span<const int> k) {
    double s = potential;
    for (std::size_t j = 0; j < a.size(); ++j) s += (2.0 * k[j] + 1.0) * a[j];
    return s;
}

// --- bands and gaps --------------------------------------------------------------------

double LandauBandSet::min_level() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : bands) m = std::min(m, b.lo);
    return m;
}

double LandauBandSet::distance(double e) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : bands) {
        if (e >= b.lo && e <= b.hi) return 0.0;
        best = std::min(best, e < b.lo ? b.lo - e : e - b.hi);
    }
    return best;
}

bool LandauBandSet::in_gap(const Interval& iv) const {
    for (const auto& b : bands)
        if (b.hi >= iv.lo && b.lo <= iv.hi) return false;
    return true;
}

std::vector<Interval> derive_gaps(const std::vector<Band>& bands, double k_max) {
    std::vector<Interval> gaps;
    if (bands.empty()) return gaps;
    std::vector<Band> sorted = bands;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Band& x, const Band& y) { return x.lo < y.lo; });
    double covered = sorted.front().hi;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].lo > covered && covered < k_max)
            gaps.push_back({covered, std::min(sorted[i].lo, k_max)});
        covered = std::max(covered, sorted[i].hi);
    }
    if (covered < k_max) gaps.push_back({covered, k_max});
    return gaps;
}

LandauBandSet sigma_bands(const FieldSamples& s, const NodeMask& region, double k_max, std::string region_name) {
    double min_a = std::numeric_limits<double>::infinity();
    double min_v = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (std::size_t node = 0; node < s.node_count(); ++node) {
        if (!selected(region, node)) continue;
        ++count;
        min_a = std::min(min_a, s.frame_at(node).front());
        min_v = std::min(min_v, s.potential[node]);
    }
    if (count == 0) throw EmptyRegion("region '" + region_name + "' selects no grid nodes");

    LandauBandSet set;
    set.region = std::move(region_name);
    set.k_max = k_max;
    const int m = max_level_order(k_max, min_a, min_v, s.n);
    for (const auto& k : enumerate_multi_indices(s.n, m)) {
        Band band{k, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (std::size_t node = 0; node < s.node_count(); ++node) {
            if (!selected(region, node)) continue;
            const double level = landau_level(s.frame_at(node), s.potential[node], k);
            band.lo = std::min(band.lo, level);
            band.hi = std::max(band.hi, level);
        }
        if (band.lo <= k_max) set.bands.push_back(std::move(band));
    }
    set.gaps = derive_gaps(set.bands, k_max);
    return set;
}

// --- K-set and distance transform ----------------------------------------------------------

std::vector<double> distance_to_mask(const Grid& grid, const std::vector<char>& mask, double* triangle_defect) {
    if (grid.dimension() != 2) throw UnsupportedGeometry("distance transform is implemented for two dimensions");
    const int nx = grid.extents()[0];
    const int ny = grid.extents()[1];
    const double hx = grid.spacing()[0];
    const double hy = grid.spacing()[1];
    const double Lx = hx * grid.cells()[0];
    const double Ly = hy * grid.cells()[1];
    const bool wrap = grid.periodic();
    const std::size_t nodes = grid.node_count();
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> dist(nodes, inf);
    std::vector<std::int64_t> source(nodes, -1);

    auto separation = [&](std::size_t a, std::size_t b) {
        double dx = std::fabs(static_cast<double>(static_cast<int>(a % static_cast<std::size_t>(nx)) -
                                                  static_cast<int>(b % static_cast<std::size_t>(nx)))) * hx;
        double dy = std::fabs(static_cast<double>(static_cast<int>(a / static_cast<std::size_t>(nx)) -
                                                  static_cast<int>(b / static_cast<std::size_t>(nx)))) * hy;
        if (wrap) {
            dx = std::min(dx, Lx - dx);
            dy = std::min(dy, Ly - dy);
        }
        return std::hypot(dx, dy);
    };

    static constexpr int kStencil[16][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1},
                                            {-1, 1}, {-1, -1}, {1, 2},  {2, 1},  {-1, 2}, {-2, 1},
                                            {1, -2}, {2, -1}, {-1, -2}, {-2, -1}};
    auto neighbour = [&](std::size_t node, int k) -> std::int64_t {
        int i = static_cast<int>(node % static_cast<std::size_t>(nx)) + kStencil[k][0];
        int j = static_cast<int>(node / static_cast<std::size_t>(nx)) + kStencil[k][1];
        if (wrap) {
            i = (i % nx + nx) % nx;
            j = (j % ny + ny) % ny;
        } else if (i < 0 || j < 0 || i >= nx || j >= ny) {
            return -1;
        }
        return static_cast<std::int64_t>(j) * nx + i;
    };

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (std::size_t node = 0; node < nodes; ++node)
        if (mask[node]) {
            dist[node] = 0.0;
            source[node] = static_cast<std::int64_t>(node);
            queue.emplace(0.0, node);
        }

    // Each node inherits the nearest source of the neighbour that reached it,
    // and stores the exact Euclidean distance to that source.
    auto relax_from = [&](std::size_t node) {
        bool changed = false;
        for (int k = 0; k < 16; ++k) {
            const auto nb = neighbour(node, k);
            if (nb < 0) continue;
            const auto m = static_cast<std::size_t>(nb);
            const double cand = separation(m, static_cast<std::size_t>(source[node]));
            if (cand < dist[m] - 1e-15 * cand) {
                dist[m] = cand;
                source[m] = source[node];
                queue.emplace(cand, m);
                changed = true;
            }
        }
        return changed;
    };

    while (!queue.empty()) {
        const auto [d, node] = queue.top();
        queue.pop();
        if (d > dist[node]) continue;
        relax_from(node);
    }

    // Relaxation sweeps: let each node try the sources of its neighbours.
    for (int sweep = 0; sweep < 4; ++sweep) {
        bool changed = false;
        for (std::size_t node = 0; node < nodes; ++node)
            if (source[node] >= 0) changed = relax_from(node) || changed;
        while (!queue.empty()) {
            const auto [d, node] = queue.top();
            queue.pop();
            if (d > dist[node]) continue;
            relax_from(node);
        }
        if (!changed) break;
    }

    if (triangle_defect) {
        double worst = 0.0;
        for (std::size_t node = 0; node < nodes; ++node) {
            if (!std::isfinite(dist[node])) continue;
            for (int k = 0; k < 8; ++k) {
                const auto nb = neighbour(node, k);
                if (nb < 0) continue;
                const auto m = static_cast<std::size_t>(nb);
                worst = std::max(worst, dist[m] - dist[node] - separation(node, m));
            }
        }
        *triangle_defect = worst;
    }
    return dist;
}

KSetField k_set(const FieldSamples& s, const Interval& interval) {
    KSetField field;
    field.interval = interval;
    const std::size_t nodes = s.node_count();
    field.inside.assign(nodes, 0);
    const int m = global_max_order(s, interval.hi);
    const auto indices = enumerate_multi_indices(s.n, m);
    for (std::size_t node = 0; node < nodes; ++node) {
        for (const auto& k : indices) {
            if (interval.contains(landau_level(s.frame_at(node), s.potential[node], k))) {
                field.inside[node] = 1;
                field.empty = false;
                break;
            }
        }
    }
    if (field.empty) {
        field.distance.assign(nodes, std::numeric_limits<double>::infinity());
        return field;
    }
    field.distance = distance_to_mask(s.grid, field.inside, &field.triangle_defect);
    return field;
}

// --- test function ------------------------------------------------------------------------------

TestFunction::TestFunction(Interval support) : support_(support) {
    if (!(support.hi > support.lo)) throw ConfigError("test function support must have positive length");
}

double TestFunction::operator()(double e) const {
    const double t = (2.0 * e - support_.lo - support_.hi) / support_.width();
    if (std::fabs(t) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

double TestFunction::derivative(double e) const {
    const double t = (2.0 * e - support_.lo - support_.hi) / support_.width();
    if (std::fabs(t) >= 1.0) return 0.0;
    const double q = 1.0 - t * t;
    return std::exp(1.0 - 1.0 / q) * (-2.0 * t / (q * q)) * (2.0 / support_.width());
}

// --- Weyl measure, count, trace coefficient ---------------------------------------------------

double weyl_measure(const FieldSamples& s, const MultiIndex& k, const Interval& interval) {
    return pairwise_sum(s.node_count(), [&](std::size_t node) {
        const double level = landau_level(s.frame_at(node), s.potential[node], k);
        return interval.contains(level) ? s.liouville_density(node) * s.grid.weight(node) : 0.0;
    });
}

WeylPrediction weyl_count_prediction(const FieldSamples& s, const Interval& interval, double p) {
    if (!(p >= 1.0)) throw ConfigError("tensor power p must be >= 1");
    WeylPrediction out;
    out.p = p;
    const int m = global_max_order(s, interval.hi);
    const auto& ext = s.grid.extents();
    const std::size_t line_nodes =
        static_cast<std::size_t>(*std::max_element(ext.begin(), ext.end()));
    for (const auto& k : enumerate_multi_indices(s.n, m)) {
        const double mu = weyl_measure(s, k, interval);
        out.terms.push_back({k, mu});

        // A level value shared by a positive-measure set of nodes at an
        // endpoint makes the count ill-posed there.
        for (double endpoint : {interval.lo, interval.hi}) {
            const double tol = 1e-9 * std::max(1.0, std::fabs(endpoint));
            std::size_t hits = 0;
            for (std::size_t node = 0; node < s.node_count(); ++node)
                if (std::fabs(landau_level(s.frame_at(node), s.potential[node], k) - endpoint) <= tol) ++hits;
            if (hits > 2 * line_nodes) {
                out.boundary_on_level_set = true;
                std::ostringstream os;
                os << "BoundaryOnLevelSet: endpoint " << endpoint << " equals Lambda_" << k.str() << " on "
                   << hits << " of " << s.node_count() << " nodes";
                out.warnings.push_back(os.str());
            }
        }
    }
    std::vector<double> parts;
    for (const auto& t : out.terms) parts.push_back(t.measure);
    out.measure_sum = pairwise_sum(parts.size(), [&](std::size_t i) { return parts[i]; });
    out.count = std::pow(p / kTwoPi, s.n) * out.measure_sum;
    return out;
}

double f0_pairing(const FieldSamples& s, const TestFunction& phi) {
    const int m = global_max_order(s, phi.support().hi);
    const auto indices = enumerate_multi_indices(s.n, m);
    const double sum = pairwise_sum(s.node_count(), [&](std::size_t node) {
        double acc = 0.0;
        for (const auto& k : indices) acc += phi(landau_level(s.frame_at(node), s.potential[node], k));
        return acc == 0.0 ? 0.0 : acc * s.liouville_density(node) * s.grid.weight(node);
    });
    return sum / std::pow(kTwoPi, s.n);
}

double local_f0(const FieldSamples& s, const TestFunction& phi, std::size_t node) {
    const int m = max_level_order(phi.support().hi, s.frame_at(node).front(), s.potential[node], s.n);
    double acc = 0.0;
    for (const auto& k : enumerate_multi_indices(s.n, m))
        acc += phi(landau_level(s.frame_at(node), s.potential[node], k));
    double prod = 1.0;
    for (double a : s.frame_at(node)) prod *= a;
    return prod * acc / std::pow(kTwoPi, s.n);
}

} // namespace landau
