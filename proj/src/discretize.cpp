#include "landau/discretize.hpp"

#include "landau/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace landau {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

// Gauss-Legendre rule by Newton iteration on P_q.
GaussRule gauss_legendre(int q) {
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(q));
    rule.weights.resize(static_cast<std::size_t>(q));
    for (int i = 0; i < (q + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= q; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = q * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(q - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(q - 1 - i)] = w;
    }
    return rule;
}

const GaussRule& gauss4() {
    static const GaussRule rule = gauss_legendre(4);
    return rule;
}

double field_b(const ModelSpec& spec, double x, double y) {
    const double pt[2] = {x, y};
    const double v = spec.two_form.front()(pt);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "magnetic field is not finite at (" << x << ", " << y << ")";
        throw FieldEvaluationError(os.str());
    }
    return v;
}

void require_flat_2d(const ModelSpec& spec) {
    if (spec.dimension() != 2)
        throw UnsupportedGeometry("assembly is implemented for two dimensions only (got d = " +
                                  std::to_string(spec.dimension()) + ")");
    if (spec.two_form.size() != 1) throw ConfigError("two-dimensional model needs exactly one field component");
    if (spec.euclidean()) return;
    const double expected[3] = {1.0, 0.0, 1.0};
    for (std::size_t k = 0; k < spec.metric.size(); ++k)
        if (!spec.metric[k].is_constant() || spec.metric[k]({}) != expected[k])
            throw UnsupportedGeometry("assembly requires the Euclidean metric g = I");
}

double gauss_box(const ModelSpec& spec, double x0, double x1, double y0, double y1) {
    const auto& r = gauss4();
    const double cx = 0.5 * (x0 + x1), hx = 0.5 * (x1 - x0);
    const double cy = 0.5 * (y0 + y1), hy = 0.5 * (y1 - y0);
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        double row = 0.0;
        for (std::size_t i = 0; i < 4; ++i) row += r.weights[i] * field_b(spec, cx + hx * r.nodes[i], cy + hy * r.nodes[j]);
        sum += r.weights[j] * row;
    }
    return sum * hx * hy;
}

double adaptive_box(const ModelSpec& spec, double x0, double x1, double y0, double y1, double whole, int depth) {
    const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
    const double q[4] = {gauss_box(spec, x0, xm, y0, ym), gauss_box(spec, xm, x1, y0, ym),
                         gauss_box(spec, x0, xm, ym, y1), gauss_box(spec, xm, x1, ym, y1)};
    const double split = (q[0] + q[1]) + (q[2] + q[3]);
    if (depth >= 8 || std::fabs(split - whole) < 1e-12 * std::max(1.0, std::fabs(split)) * 1e-2) return split;
    return (adaptive_box(spec, x0, xm, y0, ym, q[0], depth + 1) + adaptive_box(spec, xm, x1, y0, ym, q[1], depth + 1)) +
           (adaptive_box(spec, x0, xm, ym, y1, q[2], depth + 1) + adaptive_box(spec, xm, x1, ym, y1, q[3], depth + 1));
}

long nearest_admissible_p(double p, double flux) {
    const double quanta_per_p = flux / kTwoPi;
    long best = -1;
    double best_gap = std::numeric_limits<double>::infinity();
    const long hi = std::max(8L, 4L * static_cast<long>(std::ceil(p)));
    for (long q = 1; q <= hi; ++q) {
        const double m = q * quanta_per_p;
        if (std::fabs(m - std::round(m)) <= 1e-8 && std::fabs(q - p) < best_gap) {
            best_gap = std::fabs(q - p);
            best = q;
        }
    }
    return best;
}

// Fourier coefficients of the field on the torus, resolved by doubling the
// sampling size until the upper quarter of the spectrum is negligible.
struct FieldSpectrum {
    int m1 = 0, m2 = 0;
    std::vector<std::complex<double>> c; // f(u) = sum c_k exp(i kappa . u), m1 fastest
    double mean = 0.0;
};

FieldSpectrum field_spectrum(const ModelSpec& spec, const Grid& grid) {
    const double L1 = grid.spacing()[0] * grid.cells()[0];
    const double L2 = grid.spacing()[1] * grid.cells()[1];
    const double o1 = grid.origin()[0], o2 = grid.origin()[1];
    for (int m = 16; m <= 2048; m *= 2) {
        FieldSpectrum s;
        s.m1 = m;
        s.m2 = m;
        std::vector<std::complex<double>> in(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
                in[static_cast<std::size_t>(j) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] =
                    field_b(spec, o1 + L1 * i / m, o2 + L2 * j / m);
        s.c.resize(in.size());
        fftw_plan plan = fftw_plan_dft_2d(m, m, reinterpret_cast<fftw_complex*>(in.data()),
                                          reinterpret_cast<fftw_complex*>(s.c.data()), FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
        const double norm = 1.0 / (static_cast<double>(m) * m);
        double peak = 0.0, tail = 0.0;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                auto& v = s.c[static_cast<std::size_t>(j) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)];
                v *= norm;
                const int k1 = i <= m / 2 ? i : i - m;
                const int k2 = j <= m / 2 ? j : j - m;
                peak = std::max(peak, std::abs(v));
                if (4 * std::abs(k1) >= m || 4 * std::abs(k2) >= m) tail = std::max(tail, std::abs(v));
            }
        s.mean = s.c.front().real();
        if (tail <= 1e-15 * std::max(1.0, peak)) return s;
    }
    throw ConfigError("magnetic field is not resolved by a 2048^2 Fourier grid");
}

std::size_t index2(int i, int j, int n1) {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n1) + static_cast<std::size_t>(i);
}

void build_torus(const ModelSpec& spec, GaugeData& g) {
    const Grid& grid = g.grid;
    const int n1 = grid.cells()[0], n2 = grid.cells()[1];
    const double h1 = grid.spacing()[0], h2 = grid.spacing()[1];
    const double L1 = h1 * n1, L2 = h2 * n2;

    const FieldSpectrum spec_b = field_spectrum(spec, grid);
    g.fourier_size = spec_b.m1;
    g.total_flux = spec_b.mean * L1 * L2;
    const double quanta = g.p * g.total_flux / kTwoPi;
    const long m = std::lround(quanta);
    if (std::fabs(quanta - static_cast<double>(m)) > 1e-8) {
        std::ostringstream os;
        os << "flux not quantized: p * Phi / 2pi = " << quanta << " for p = " << g.p;
        const long near = nearest_admissible_p(g.p, g.total_flux);
        if (near > 0) os << " (nearest admissible p = " << near << ")";
        throw FluxNotQuantized(os.str(), g.p, g.total_flux, near);
    }
    g.flux_quanta = m;
    // Constant part with exactly quantized flux so the twists close up.
    const double bbar = kTwoPi * static_cast<double>(m) / (g.p * L1 * L2);
    g.mean_field = bbar;

    const std::size_t nodes = grid.node_count();
    g.theta_x.assign(nodes, 0.0);
    g.theta_y.assign(nodes, 0.0);

    // Periodic part: A = (-d2 psi, d1 psi) with Laplace psi = b - mean. Each
    // Fourier mode is integrated along the edge with a Gauss rule; folding
    // the modes onto the lattice evaluates all edges with one inverse FFT.
    struct Mode {
        double kappa1, kappa2;
        int f1, f2;
        std::complex<double> a1, a2;
    };
    std::vector<Mode> modes;
    const int m1 = spec_b.m1, m2 = spec_b.m2;
    for (int j = 0; j < m2; ++j)
        for (int i = 0; i < m1; ++i) {
            if (2 * i == m1 || 2 * j == m2 || (i == 0 && j == 0)) continue;
            const auto c = spec_b.c[index2(i, j, m1)];
            if (c == std::complex<double>(0.0, 0.0)) continue;
            const int k1 = 2 * i < m1 ? i : i - m1;
            const int k2 = 2 * j < m2 ? j : j - m2;
            const double kappa1 = kTwoPi * k1 / L1, kappa2 = kTwoPi * k2 / L2;
            const std::complex<double> psi = -c / (kappa1 * kappa1 + kappa2 * kappa2);
            const std::complex<double> I(0.0, 1.0);
            modes.push_back({kappa1, kappa2, ((k1 % n1) + n1) % n1, ((k2 % n2) + n2) % n2,
                             -I * kappa2 * psi, I * kappa1 * psi});
        }

    std::vector<std::complex<double>> cx(nodes), cy(nodes), ox(nodes), oy(nodes);
    fftw_plan px = fftw_plan_dft_2d(n2, n1, reinterpret_cast<fftw_complex*>(cx.data()),
                                    reinterpret_cast<fftw_complex*>(ox.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_plan py = fftw_plan_dft_2d(n2, n1, reinterpret_cast<fftw_complex*>(cy.data()),
                                    reinterpret_cast<fftw_complex*>(oy.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
    auto edge_factor = [](const GaussRule& r, double kappa, double h) {
        std::complex<double> s(0.0, 0.0);
        for (std::size_t q = 0; q < r.nodes.size(); ++q)
            s += r.weights[q] * std::polar(1.0, kappa * 0.5 * h * (1.0 + r.nodes[q]));
        return 0.5 * h * s;
    };
    std::vector<double> prev_x, prev_y;
    std::vector<double> per_x(nodes, 0.0), per_y(nodes, 0.0);
    if (!modes.empty()) {
        for (int q = 4;; q *= 2) {
            const GaussRule rule = gauss_legendre(q);
            std::fill(cx.begin(), cx.end(), 0.0);
            std::fill(cy.begin(), cy.end(), 0.0);
            for (const auto& md : modes) {
                cx[index2(md.f1, md.f2, n1)] += md.a1 * edge_factor(rule, md.kappa1, h1);
                cy[index2(md.f1, md.f2, n1)] += md.a2 * edge_factor(rule, md.kappa2, h2);
            }
            fftw_execute(px);
            fftw_execute(py);
            for (std::size_t k = 0; k < nodes; ++k) {
                per_x[k] = g.p * ox[k].real();
                per_y[k] = g.p * oy[k].real();
            }
            double change = std::numeric_limits<double>::infinity();
            if (!prev_x.empty()) {
                change = 0.0;
                for (std::size_t k = 0; k < nodes; ++k)
                    change = std::max({change, std::fabs(per_x[k] - prev_x[k]), std::fabs(per_y[k] - prev_y[k])});
            }
            g.gauss_points = q;
            if (change < 1e-12 || q >= 64) break;
            prev_x = per_x;
            prev_y = per_y;
        }
    }
    fftw_destroy_plan(px);
    fftw_destroy_plan(py);

    for (int j = 0; j < n2; ++j)
        for (int i = 0; i < n1; ++i) {
            const std::size_t k = index2(i, j, n1);
            g.theta_x[k] = per_x[k];
            if (i == n1 - 1) g.theta_x[k] -= g.p * bbar * L1 * (j * h2);
            g.theta_y[k] = per_y[k] + g.p * bbar * (i * h1) * h2;
        }
}

void build_rectangle(const ModelSpec& spec, GaugeData& g) {
    const Grid& grid = g.grid;
    const int n1 = grid.cells()[0], n2 = grid.cells()[1];
    const int e1 = n1 + 1;
    const double h1 = grid.spacing()[0], h2 = grid.spacing()[1];
    const double o1 = grid.origin()[0], o2 = grid.origin()[1];
    const std::size_t nodes = grid.node_count();
    g.theta_x.assign(nodes, 0.0);
    g.theta_y.assign(nodes, 0.0);

    // A = (0, a2) with a2(x1, x2) = int_0^x1 b(s, x2) ds; the phase of the
    // vertical edge at column i is p times the flux between x1 = 0 and x1 = x_i
    // across the edge's row strip, accumulated cell by cell.
    const int i0 = std::clamp(static_cast<int>(std::floor((0.0 - o1) / h1)), 0, n1 - 1);
    std::vector<double> cumulative(static_cast<std::size_t>(n1) + 1);
    double total = 0.0;
    for (int j = 0; j < n2; ++j) {
        const double y0 = o2 + j * h2, y1 = o2 + (j + 1) * h2;
        cumulative[0] = 0.0;
        for (int i = 0; i < n1; ++i)
            cumulative[static_cast<std::size_t>(i) + 1] =
                cumulative[static_cast<std::size_t>(i)] + box_flux(spec, o1 + i * h1, o1 + (i + 1) * h1, y0, y1);
        total += cumulative[static_cast<std::size_t>(n1)];
        const double xi0 = o1 + i0 * h1;
        const double ref = cumulative[static_cast<std::size_t>(i0)] + (xi0 == 0.0 ? 0.0 : box_flux(spec, xi0, 0.0, y0, y1));
        for (int i = 0; i <= n1; ++i)
            g.theta_y[index2(i, j, e1)] = g.p * (cumulative[static_cast<std::size_t>(i)] - ref);
    }
    g.total_flux = total;
}

} // namespace

double box_flux(const ModelSpec& spec, double x0, double x1, double y0, double y1) {
    return adaptive_box(spec, x0, x1, y0, y1, gauss_box(spec, x0, x1, y0, y1), 0);
}

double sup_field(const ModelSpec& spec, const Grid& grid) {
    double sup = 0.0;
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.coords(k);
        sup = std::max(sup, std::fabs(field_b(spec, x[0], x[1])));
    }
    return sup;
}

GaugeData build_gauge(const ModelSpec& spec, const Grid& grid, int p) {
    require_flat_2d(spec);
    if (p < 1) throw ConfigError("tensor power p must be at least 1");
    if (grid.dimension() != 2) throw UnsupportedGeometry("grid must be two-dimensional");
    GaugeData g;
    g.grid = grid;
    g.p = p;
    if (grid.periodic()) build_torus(spec, g);
    else build_rectangle(spec, g);
    return g;
}

void apply_gauge_transform(GaugeData& gauge, std::span<const double> chi) {
    const Grid& grid = gauge.grid;
    const int e1 = grid.extents()[0], e2 = grid.extents()[1];
    if (chi.size() != grid.node_count()) throw ConfigError("gauge function must have one value per node");
    for (int j = 0; j < e2; ++j)
        for (int i = 0; i < e1; ++i) {
            const std::size_t k = index2(i, j, e1);
            const int ix = i + 1 < e1 ? i + 1 : (grid.periodic() ? 0 : -1);
            const int jy = j + 1 < e2 ? j + 1 : (grid.periodic() ? 0 : -1);
            if (ix >= 0) gauge.theta_x[k] += chi[index2(ix, j, e1)] - chi[k];
            if (jy >= 0) gauge.theta_y[k] += chi[index2(i, jy, e1)] - chi[k];
        }
}

double plaquette_phase(const GaugeData& gauge, std::size_t node) {
    const Grid& grid = gauge.grid;
    const int e1 = grid.extents()[0], e2 = grid.extents()[1];
    const int i = static_cast<int>(node % static_cast<std::size_t>(e1));
    const int j = static_cast<int>(node / static_cast<std::size_t>(e1));
    const int i1 = (i + 1) % e1, j1 = (j + 1) % e2;
    const double sum = gauge.theta_x[index2(i, j, e1)] + gauge.theta_y[index2(i1, j, e1)] -
                       gauge.theta_x[index2(i, j1, e1)] - gauge.theta_y[index2(i, j, e1)];
    return std::remainder(sum, kTwoPi);
}

double plaquette_defect(const ModelSpec& spec, const GaugeData& gauge) {
    const Grid& grid = gauge.grid;
    const int n1 = grid.cells()[0], n2 = grid.cells()[1];
    const int e1 = grid.extents()[0];
    const double h1 = grid.spacing()[0], h2 = grid.spacing()[1];
    const double o1 = grid.origin()[0], o2 = grid.origin()[1];
    double worst = 0.0;
    for (int j = 0; j < n2; ++j)
        for (int i = 0; i < n1; ++i) {
            const double flux = box_flux(spec, o1 + i * h1, o1 + (i + 1) * h1, o2 + j * h2, o2 + (j + 1) * h2);
            const double phase = plaquette_phase(gauge, index2(i, j, e1));
            worst = std::max(worst, std::fabs(std::remainder(phase - gauge.p * flux, kTwoPi)));
        }
    return worst;
}

std::vector<std::size_t> unknown_nodes(const Grid& grid) {
    std::vector<std::size_t> nodes;
    const int e1 = grid.extents()[0], e2 = grid.extents()[1];
    if (grid.periodic()) {
        nodes.resize(grid.node_count());
        for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = k;
        return nodes;
    }
    nodes.reserve(static_cast<std::size_t>(e1 - 2) * static_cast<std::size_t>(e2 - 2));
    for (int j = 1; j + 1 < e2; ++j)
        for (int i = 1; i + 1 < e1; ++i) nodes.push_back(index2(i, j, e1));
    return nodes;
}

std::vector<std::array<double, 2>> unknown_coordinates(const Grid& grid) {
    const auto nodes = unknown_nodes(grid);
    std::vector<std::array<double, 2>> xy(nodes.size());
    double buf[2];
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        grid.coords(nodes[k], buf);
        xy[k] = {buf[0], buf[1]};
    }
    return xy;
}

SparseHermitian assemble(const ModelSpec& spec, const Grid& grid, int p, const GaugeData& gauge) {
    require_flat_2d(spec);
    if (gauge.p != p || gauge.grid.cells() != grid.cells() || gauge.grid.periodic() != grid.periodic())
        throw ConfigError("gauge data was built for a different grid or tensor power");
    grid.require_resolution(p, sup_field(spec, grid));

    const int e1 = grid.extents()[0], e2 = grid.extents()[1];
    const double h1 = grid.spacing()[0], h2 = grid.spacing()[1];
    const double tx = 1.0 / (p * h1 * h1), ty = 1.0 / (p * h2 * h2);
    const bool torus = grid.periodic();

    // Unknown number of each node, -1 on the Dirichlet boundary.
    std::vector<int> unknown(grid.node_count(), -1);
    const auto nodes = unknown_nodes(grid);
    for (std::size_t u = 0; u < nodes.size(); ++u) unknown[nodes[u]] = static_cast<int>(u);

    SparseHermitian::Builder builder(static_cast<int>(nodes.size()));
    // H(a, b) = -t exp(-i theta_{a->b}); only the lower triangle is supplied.
    auto hop = [&](int a, int b, double t, double theta) {
        if (a < 0 || b < 0) return;
        const std::complex<double> h_ab = -t * std::polar(1.0, -theta);
        if (a > b) builder.add(a, b, h_ab);
        else builder.add(b, a, std::conj(h_ab));
    };
    double buf[2];
    for (std::size_t u = 0; u < nodes.size(); ++u) {
        const std::size_t k = nodes[u];
        grid.coords(k, buf);
        const double v = spec.potential_at(buf);
        if (!std::isfinite(v)) throw FieldEvaluationError("potential is not finite at a lattice node");
        builder.add_diagonal(static_cast<int>(u), 2.0 * tx + 2.0 * ty + v);
        const int i = static_cast<int>(k % static_cast<std::size_t>(e1));
        const int j = static_cast<int>(k / static_cast<std::size_t>(e1));
        const int ix = i + 1 < e1 ? i + 1 : (torus ? 0 : -1);
        const int jy = j + 1 < e2 ? j + 1 : (torus ? 0 : -1);
        if (ix >= 0) hop(static_cast<int>(u), unknown[index2(ix, j, e1)], tx, gauge.theta_x[k]);
        if (jy >= 0) hop(static_cast<int>(u), unknown[index2(i, jy, e1)], ty, gauge.theta_y[k]);
    }

    LatticeLayout layout;
    layout.periodic = torus;
    layout.nx = torus ? e1 : e1 - 2;
    layout.ny = torus ? e2 : e2 - 2;
    layout.hx = h1;
    layout.hy = h2;
    layout.x0 = grid.origin()[0] + (torus ? 0.0 : h1);
    layout.y0 = grid.origin()[1] + (torus ? 0.0 : h2);
    return builder.build(layout);
}

} // namespace landau
