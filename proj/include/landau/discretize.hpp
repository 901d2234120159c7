#pragma once

#include "landau/model.hpp"
#include "landau/sparse.hpp"

#include <array>
#include <span>
#include <vector>

namespace landau {

/// Peierls phases of a 2D lattice.
///
/// theta_x[k] belongs to the edge from node k to its +x1 neighbour,
/// theta_y[k] to the edge towards +x2, both as p * int A.dl along the edge.
/// On a torus the last column and row wrap to index 0, and the wrap edges
/// also carry the transition phase of the line bundle (twist): the edge from
/// (N1-1, j) to (0, j) holds -p * bbar * L1 * y_j. On a rectangle arrays
/// cover every lattice node including the boundary; edges leaving the box
/// are unused.
struct GaugeData {
    Grid grid;
    int p = 1;
    std::vector<double> theta_x;
    std::vector<double> theta_y;
    double total_flux = 0.0;   // integral of b over the domain
    double mean_field = 0.0;   // constant part realized by the twisted gauge
    long flux_quanta = 0;      // p * total_flux / 2pi (torus)
    int fourier_size = 0;      // FFT size used for the periodic part (torus)
    int gauss_points = 0;      // per-edge Gauss rule that met the tolerance
};

/// Largest |p * b| over the grid nodes; the resolution gate uses sup b.
double sup_field(const ModelSpec& spec, const Grid& grid);

GaugeData build_gauge(const ModelSpec& spec, const Grid& grid, int p);

/// theta_e += chi(head) - chi(tail) for every edge.
void apply_gauge_transform(GaugeData& gauge, std::span<const double> chi);

/// Integral of b over the box [x0, x1] x [y0, y1] by adaptive tensor Gauss.
double box_flux(const ModelSpec& spec, double x0, double x1, double y0, double y1);

/// Largest deviation, reduced modulo 2pi, between the oriented phase sum of
/// each lattice cell and p times the flux of b through it.
double plaquette_defect(const ModelSpec& spec, const GaugeData& gauge);

/// Oriented phase sum of the cell whose lower-left corner is `node`,
/// reduced to (-pi, pi].
double plaquette_phase(const GaugeData& gauge, std::size_t node);

/// Five-point Peierls discretization of (1/p) sum (i d_j + p A_j)^2 + V.
///
/// Torus: one unknown per node. Rectangle: unknowns are the interior nodes
/// (Dirichlet data on the boundary), numbered with x1 fastest.
SparseHermitian assemble(const ModelSpec& spec, const Grid& grid, int p, const GaugeData& gauge);

/// Coordinates of the unknowns of an assembled operator.
std::vector<std::array<double, 2>> unknown_coordinates(const Grid& grid);
/// Grid node of each unknown.
std::vector<std::size_t> unknown_nodes(const Grid& grid);

} // namespace landau
