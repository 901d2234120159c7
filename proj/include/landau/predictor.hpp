#pragma once

#include "landau/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace landau {

/// Closed energy interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    double width() const noexcept { return hi - lo; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
};

/// Landau multi-index k in Z_+^n.
struct MultiIndex {
    std::vector<int> k;

    int order() const noexcept;
    std::string str() const;
    bool operator==(const MultiIndex&) const = default;
};

/// All k in Z_+^n with |k| <= max_order, graded lexicographic order
/// (by |k|, then lexicographically descending in k_1).
std::vector<MultiIndex> enumerate_multi_indices(int n, int max_order);

/// Largest |k| that can have Lambda_k <= k_max anywhere, from
/// Lambda_k >= (2|k| + n) min_a + min_V. Negative when no level qualifies.
int max_level_order(double k_max, double min_a, double min_v, int n);

/// Positive a_1 <= ... <= a_n with spec(g^{-1} B) = {+-i a_j}.
///
/// Computed from the Hermitian matrix i g^{-1/2} B g^{-1/2}, whose eigenvalues
/// are +-a_j. Throws DegenerateField if some a_j < 1e-12 max a_j.
std::vector<double> frame_eigenvalues(const Eigen::MatrixXd& metric, const Eigen::MatrixXd& two_form);

/// Lambda_k = sum_j (2 k_j + 1) a_j + V.
double landau_level(std::span<const double> a, double potential, std::span<const int> k);
inline double landau_level(std::span<const double> a, double potential, const MultiIndex& k) {
    return landau_level(a, potential, std::span<const int>(k.k));
}

struct Band {
    MultiIndex k;
    double lo = 0.0;
    double hi = 0.0;
};

/// Union of local Landau levels over a region, truncated at k_max.
struct LandauBandSet {
    std::string region;
    double k_max = 0.0;
    std::vector<Band> bands;    // graded lexicographic in k
    std::vector<Interval> gaps; // open intervals of [min lo, k_max] outside every band

    double min_level() const;
    /// Distance from e to the nearest band (0 inside a band).
    double distance(double e) const;
    bool in_gap(const Interval& iv) const;
};

/// Node mask; an empty mask selects every node.
using NodeMask = std::vector<char>;

LandauBandSet sigma_bands(const FieldSamples& samples, const NodeMask& region, double k_max,
                          std::string region_name = "domain");

/// Gaps in [lowest band start, k_max] left uncovered by the bands.
std::vector<Interval> derive_gaps(const std::vector<Band>& bands, double k_max);

/// Points whose local Landau spectrum meets an interval, plus the distance of
/// every node to that set.
struct KSetField {
    Interval interval;
    std::vector<char> inside;
    std::vector<double> distance; // +inf everywhere when the set is empty
    bool empty = true;
    /// Largest violation of d(x) <= d(y) + |x - y| over grid edges found by
    /// the verification sweep; zero up to rounding.
    double triangle_defect = 0.0;
};

KSetField k_set(const FieldSamples& samples, const Interval& interval);

/// Multi-source shortest-path distance to the nodes of `mask` along grid
/// edges (8 neighbours plus knight moves, wrapping on a torus), followed by
/// a relaxation sweep. Two dimensions only.
std::vector<double> distance_to_mask(const Grid& grid, const std::vector<char>& mask,
                                     double* triangle_defect = nullptr);

/// Smooth bump supported in [lo, hi]: exp(1 - 1/(1 - t^2)), t = (2e - lo - hi)/(hi - lo).
class TestFunction {
public:
    TestFunction() = default;
    explicit TestFunction(Interval support);

    const Interval& support() const noexcept { return support_; }
    double operator()(double e) const;
    double derivative(double e) const;

private:
    Interval support_{0.0, 1.0};
};

/// mu({x : Lambda_k(x) in [lo, hi]}) with dmu = prod a_j dv_g, by a node
/// Riemann sum. Endpoints count as inside.
double weyl_measure(const FieldSamples& samples, const MultiIndex& k, const Interval& interval);

struct WeylTerm {
    MultiIndex k;
    double measure = 0.0;
};

struct WeylPrediction {
    double p = 1.0;
    double count = 0.0;        // p^n / (2pi)^n * sum_k measure
    double measure_sum = 0.0;
    std::vector<WeylTerm> terms;
    bool boundary_on_level_set = false;
    std::vector<std::string> warnings;
};

WeylPrediction weyl_count_prediction(const FieldSamples& samples, const Interval& interval, double p);

/// Leading trace coefficient (2pi)^{-n} sum_k int phi(Lambda_k) dmu.
double f0_pairing(const FieldSamples& samples, const TestFunction& phi);

/// (2pi)^{-n} prod a_j(x0) sum_k phi(Lambda_k(x0)) at one node.
double local_f0(const FieldSamples& samples, const TestFunction& phi, std::size_t node);

/// Result of repeating a quadrature on a grid refined by two.
struct RefinementCheck {
    double coarse = 0.0;
    double fine = 0.0;
    double relative_difference() const;
};

/// Deterministic pairwise summation of f(0) + ... + f(count - 1) with a fixed
/// reduction tree.
double pairwise_sum(std::size_t count, const std::function<double(std::size_t)>& f);

} // namespace landau
