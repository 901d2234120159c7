#pragma once

#include "landau/expr.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace landau {

enum class DomainKind { Torus, Rectangle };

/// Torus: periodic box [origin, origin + L). Rectangle: closed box with
/// Dirichlet boundary.
struct Domain {
    DomainKind kind = DomainKind::Torus;
    std::vector<double> lengths;
    std::vector<double> origin;

    int dimension() const noexcept { return static_cast<int>(lengths.size()); }
    double volume() const noexcept;
};

/// Continuous problem data: metric g, magnetic two-form B, potential V.
///
/// The metric is stored as the packed upper triangle (row-major, diagonal
/// included) and the two-form as the packed strict upper triangle; the lower
/// halves are mirrored on evaluation, so symmetry of g and antisymmetry of B
/// hold exactly at every point. In two dimensions the two-form may instead
/// be given as a density b with B = b dv_g.
struct ModelSpec {
    Domain domain;
    SymbolTable symbols;
    std::vector<Expression> metric;    // empty: Euclidean
    std::vector<Expression> two_form;  // packed strict upper triangle, or {b}
    bool two_form_is_density = false; // two_form holds the single density b
    Expression potential = Expression::constant(0.0);
    double b0 = 0.0;

    int dimension() const noexcept { return domain.dimension(); }
    int half_dimension() const noexcept { return dimension() / 2; }
    bool euclidean() const noexcept { return metric.empty(); }

    Eigen::MatrixXd metric_at(std::span<const double> x) const;
    /// Matrix of B(u, v) = u^T B v in coordinates.
    Eigen::MatrixXd two_form_at(std::span<const double> x) const;
    double potential_at(std::span<const double> x) const { return potential(x); }
    /// Scalar field b with B = b dv_g (two dimensions only).
    double density_at(std::span<const double> x) const;
};

/// Sampling lattice for a domain.
///
/// Torus: N_i nodes per axis at origin + k h_i, k = 0..N_i-1, h_i = L_i/N_i.
/// Rectangle: N_i + 1 nodes per axis including both boundary planes; the
/// interior nodes k = 1..N_i-1 carry the Dirichlet discretization.
/// Flat node indices run with x1 fastest.
class Grid {
public:
    Grid() = default;
    Grid(const Domain& domain, std::vector<int> cells);

    int dimension() const noexcept { return static_cast<int>(cells_.size()); }
    bool periodic() const noexcept { return periodic_; }
    const std::vector<int>& cells() const noexcept { return cells_; }
    const std::vector<int>& extents() const noexcept { return extents_; }
    const std::vector<double>& spacing() const noexcept { return spacing_; }
    const std::vector<double>& origin() const noexcept { return origin_; }
    std::size_t node_count() const noexcept { return node_count_; }

    void coords(std::size_t node, std::span<double> out) const;
    std::vector<double> coords(std::size_t node) const;
    std::vector<int> multi_index(std::size_t node) const;
    std::size_t flat_index(std::span<const int> idx) const;

    /// Quadrature weight of a node: prod h_i on a torus, trapezoid weights on
    /// a rectangle.
    double weight(std::size_t node) const;
    double cell_volume() const;

    /// Grid with every spacing halved; shares all nodes of this grid.
    Grid refined(int factor = 2) const;

    /// Largest h_i * sqrt(p * sup_b); the resolution gate requires <= 1/8.
    double resolution_ratio(double p, double sup_b) const;
    /// Throws ResolutionTooCoarse when fewer than 8 nodes per magnetic length.
    void require_resolution(double p, double sup_b) const;

private:
    std::vector<int> cells_;
    std::vector<int> extents_;
    std::vector<double> spacing_;
    std::vector<double> origin_;
    bool periodic_ = true;
    std::size_t node_count_ = 0;
};

/// Smallest cell count per axis meeting `nodes_per_length` nodes per magnetic
/// length (p * sup_b)^(-1/2), rounded up to a multiple of `multiple`.
std::vector<int> cells_for_resolution(const Domain& domain, double p, double sup_b,
                                      double nodes_per_length, int multiple = 2);

/// Field values at every grid node. Matrices are stored node-major.
struct FieldSamples {
    Grid grid;
    int n = 1; // half dimension
    std::vector<double> metric;     // d*d per node
    std::vector<double> two_form;   // d*d per node
    std::vector<double> potential;  // V per node
    std::vector<double> frame;      // a_1 <= ... <= a_n per node
    std::vector<double> sqrt_det_g; // per node

    std::size_t node_count() const noexcept { return potential.size(); }
    std::span<const double> frame_at(std::size_t node) const {
        return {frame.data() + node * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    }
    /// prod_j a_j * sqrt|g|: density of the Liouville measure against dx.
    double liouville_density(std::size_t node) const;
    double min_frame() const;
    double max_frame() const;
    double min_potential() const;
    double max_potential() const;
};

struct ValidationReport {
    double min_frame_eigenvalue = 0.0; // min over nodes and j of a_j(x)
    double max_frame_eigenvalue = 0.0;
    double sup_abs_potential = 0.0;
    double max_metric_condition = 1.0;
    double declared_b0 = 0.0;
    std::size_t nodes_checked = 0;
    bool passed = false;
};

/// Relative slack allowed when comparing min a_j against the declared b0.
inline constexpr double kBoundSlack = 1e-12;

/// Checks the standing assumptions on every grid node; throws
/// NonDegeneracyViolation or MetricNotSPD.
ValidationReport validate_model(const ModelSpec& spec, const Grid& grid);

FieldSamples sample_fields(const ModelSpec& spec, const Grid& grid);

} // namespace landau
