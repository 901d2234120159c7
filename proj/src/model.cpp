#include "landau/model.hpp"

#include "landau/errors.hpp"
#include "landau/predictor.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace landau {

namespace {

std::string format_point(std::span<const double> x) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    return os.str();
}

double checked(double v, const char* what, std::span<const double> x) {
    if (!std::isfinite(v))
        throw FieldEvaluationError(std::string(what) + " is not finite at " + format_point(x));
    return v;
}

} // namespace

double Domain::volume() const noexcept {
    return std::accumulate(lengths.begin(), lengths.end(), 1.0, std::multiplies<>());
}

Eigen::MatrixXd ModelSpec::metric_at(std::span<const double> x) const {
    const int d = dimension();
    if (metric.empty()) return Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd g(d, d);
    std::size_t k = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = checked(metric[k++](x), "metric", x);
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

double ModelSpec::density_at(std::span<const double> x) const {
    if (!two_form_is_density || dimension() != 2)
        throw ConfigError("density_at requires a two-dimensional model given by its density b");
    return checked(two_form.front()(x), "magnetic density b", x);
}

Eigen::MatrixXd ModelSpec::two_form_at(std::span<const double> x) const {
    const int d = dimension();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d, d);
    if (two_form_is_density) {
        double scale = 1.0;
        if (!metric.empty()) scale = std::sqrt(metric_at(x).determinant());
        const double b = density_at(x) * scale;
        B(0, 1) = b;
        B(1, 0) = -b;
        return B;
    }
    std::size_t k = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double v = checked(two_form[k++](x), "two-form", x);
            B(i, j) = v;
            B(j, i) = -v;
        }
    return B;
}

// --- Grid ---------------------------------------------------------------------

Grid::Grid(const Domain& domain, std::vector<int> cells)
    : cells_(std::move(cells)), periodic_(domain.kind == DomainKind::Torus) {
    const int d = domain.dimension();
    if (static_cast<int>(cells_.size()) != d)
        throw ConfigError("grid has " + std::to_string(cells_.size()) + " axes, domain has " +
                          std::to_string(d));
    origin_ = domain.origin.empty() ? std::vector<double>(static_cast<std::size_t>(d), 0.0)
                                    : domain.origin;
    node_count_ = 1;
    for (int i = 0; i < d; ++i) {
        if (cells_[static_cast<std::size_t>(i)] < 2) throw ConfigError("grid needs at least 2 cells per axis");
        const double L = domain.lengths[static_cast<std::size_t>(i)];
        if (!(L > 0.0)) throw ConfigError("domain side lengths must be positive");
        spacing_.push_back(L / cells_[static_cast<std::size_t>(i)]);
        extents_.push_back(periodic_ ? cells_[static_cast<std::size_t>(i)]
                                     : cells_[static_cast<std::size_t>(i)] + 1);
        node_count_ *= static_cast<std::size_t>(extents_.back());
    }
}

void Grid::coords(std::size_t node, std::span<double> out) const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const auto e = static_cast<std::size_t>(extents_[i]);
        out[i] = origin_[i] + static_cast<double>(node % e) * spacing_[i];
        node /= e;
    }
}

std::vector<double> Grid::coords(std::size_t node) const {
    std::vector<double> x(cells_.size());
    coords(node, x);
    return x;
}

std::vector<int> Grid::multi_index(std::size_t node) const {
    std::vector<int> idx(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const auto e = static_cast<std::size_t>(extents_[i]);
        idx[i] = static_cast<int>(node % e);
        node /= e;
    }
    return idx;
}

std::size_t Grid::flat_index(std::span<const int> idx) const {
    std::size_t flat = 0;
    for (std::size_t i = cells_.size(); i-- > 0;)
        flat = flat * static_cast<std::size_t>(extents_[i]) + static_cast<std::size_t>(idx[i]);
    return flat;
}

double Grid::cell_volume() const {
    return std::accumulate(spacing_.begin(), spacing_.end(), 1.0, std::multiplies<>());
}

double Grid::weight(std::size_t node) const {
    double w = cell_volume();
    if (periodic_) return w;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const auto e = static_cast<std::size_t>(extents_[i]);
        const std::size_t k = node % e;
        node /= e;
        if (k == 0 || k + 1 == e) w *= 0.5;
    }
    return w;
}

Grid Grid::refined(int factor) const {
    Domain domain;
    domain.kind = periodic_ ? DomainKind::Torus : DomainKind::Rectangle;
    domain.origin = origin_;
    std::vector<int> cells;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        domain.lengths.push_back(spacing_[i] * cells_[i]);
        cells.push_back(cells_[i] * factor);
    }
    return Grid(domain, std::move(cells));
}

double Grid::resolution_ratio(double p, double sup_b) const {
    const double h = *std::max_element(spacing_.begin(), spacing_.end());
    return h * std::sqrt(p * sup_b);
}

void Grid::require_resolution(double p, double sup_b) const {
    const double ratio = resolution_ratio(p, sup_b);
    if (ratio > 0.125 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "grid too coarse for p = " << p << ": h*sqrt(p*sup b) = " << ratio
           << " exceeds 1/8 (fewer than 8 nodes per magnetic length)";
        throw ResolutionTooCoarse(os.str());
    }
}

std::vector<int> cells_for_resolution(const Domain& domain, double p, double sup_b,
                                      double nodes_per_length, int multiple) {
    const double magnetic_length = 1.0 / std::sqrt(p * sup_b);
    std::vector<int> cells;
    for (double L : domain.lengths) {
        int c = static_cast<int>(std::ceil(L * nodes_per_length / magnetic_length - 1e-9));
        c = std::max(c, 4);
        if (multiple > 1) c = ((c + multiple - 1) / multiple) * multiple;
        cells.push_back(c);
    }
    return cells;
}

// --- FieldSamples ---------------------------------------------------------------

double FieldSamples::liouville_density(std::size_t node) const {
    double prod = sqrt_det_g[node];
    for (double a : frame_at(node)) prod *= a;
    return prod;
}

double FieldSamples::min_frame() const { return *std::min_element(frame.begin(), frame.end()); }
double FieldSamples::max_frame() const { return *std::max_element(frame.begin(), frame.end()); }
double FieldSamples::min_potential() const {
    return *std::min_element(potential.begin(), potential.end());
}
double FieldSamples::max_potential() const {
    return *std::max_element(potential.begin(), potential.end());
}

FieldSamples sample_fields(const ModelSpec& spec, const Grid& grid) {
    const int d = spec.dimension();
    if (d % 2 != 0 || d == 0) throw ConfigError("model dimension must be even and positive");
    if (grid.dimension() != d) throw ConfigError("grid and model dimensions differ");

    FieldSamples s;
    s.grid = grid;
    s.n = d / 2;
    const std::size_t nodes = grid.node_count();
    const auto dd = static_cast<std::size_t>(d * d);
    s.metric.resize(nodes * dd);
    s.two_form.resize(nodes * dd);
    s.potential.resize(nodes);
    s.frame.resize(nodes * static_cast<std::size_t>(s.n));
    s.sqrt_det_g.resize(nodes);

    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t node = 0; node < nodes; ++node) {
        grid.coords(node, x);
        const Eigen::MatrixXd g = spec.metric_at(x);
        const Eigen::MatrixXd B = spec.two_form_at(x);
        std::copy(g.data(), g.data() + dd, s.metric.begin() + static_cast<std::ptrdiff_t>(node * dd));
        std::copy(B.data(), B.data() + dd, s.two_form.begin() + static_cast<std::ptrdiff_t>(node * dd));
        s.potential[node] = checked(spec.potential_at(x), "potential", x);
        s.sqrt_det_g[node] = spec.euclidean() ? 1.0 : std::sqrt(g.determinant());

        std::vector<double> a;
        try {
            a = frame_eigenvalues(g, B);
        } catch (const Error& e) {
            throw FieldEvaluationError(std::string(e.what()) + " at node " + format_point(x));
        }
        std::copy(a.begin(), a.end(), s.frame.begin() + static_cast<std::ptrdiff_t>(node * static_cast<std::size_t>(s.n)));
    }
    return s;
}

ValidationReport validate_model(const ModelSpec& spec, const Grid& grid) {
    const int d = spec.dimension();
    if (d % 2 != 0 || d == 0) throw ConfigError("model dimension must be even and positive");
    if (!(spec.b0 > 0.0)) throw NonDegeneracyViolation("declared lower bound b0 must be positive");

    ValidationReport report;
    report.declared_b0 = spec.b0;
    report.min_frame_eigenvalue = std::numeric_limits<double>::infinity();
    report.max_frame_eigenvalue = 0.0;

    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
        grid.coords(node, x);
        const Eigen::MatrixXd g = spec.metric_at(x);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(g, Eigen::EigenvaluesOnly);
        const double gmin = eg.eigenvalues().minCoeff();
        const double gmax = eg.eigenvalues().maxCoeff();
        if (!(gmin > 0.0))
            throw MetricNotSPD("metric is not positive definite at " + format_point(x) +
                               " (smallest eigenvalue " + std::to_string(gmin) + ")");
        report.max_metric_condition = std::max(report.max_metric_condition, gmax / gmin);

        const double v = checked(spec.potential_at(x), "potential", x);
        report.sup_abs_potential = std::max(report.sup_abs_potential, std::fabs(v));

        const Eigen::MatrixXd B = spec.two_form_at(x);
        // A vanishing field has no positive frame eigenvalues at all; report it
        // as the non-degeneracy failure it is.
        Eigen::MatrixXd gi = eg.operatorInverseSqrt();
        Eigen::MatrixXcd herm = std::complex<double>(0.0, 1.0) * (gi * B * gi).cast<std::complex<double>>();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eb(herm, Eigen::EigenvaluesOnly);
        const auto& ev = eb.eigenvalues();
        for (int j = 0; j < d / 2; ++j) {
            const double a = ev(d - 1 - j);
            report.min_frame_eigenvalue = std::min(report.min_frame_eigenvalue, a);
            report.max_frame_eigenvalue = std::max(report.max_frame_eigenvalue, a);
        }
        ++report.nodes_checked;
    }

    if (report.min_frame_eigenvalue < spec.b0 * (1.0 - kBoundSlack)) {
        std::ostringstream os;
        os << "min_x a_j(x) = " << report.min_frame_eigenvalue << " is below the declared b0 = " << spec.b0;
        throw NonDegeneracyViolation(os.str());
    }
    report.passed = true;
    return report;
}

} // namespace landau
