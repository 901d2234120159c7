#pragma once

#include "landau/ldlt.hpp"
#include "landau/predictor.hpp"
#include "landau/sparse.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace landau {

enum class InertiaMethod { Auto, Sparse, Dense };

struct SpectralOptions {
    InertiaMethod method = InertiaMethod::Auto;
    int dense_threshold = 400;     // Auto uses dense factorizations up to this size
    double pivot_tolerance = 1e-13;
    std::uint64_t seed = 20170521;
    int slice_max = 8;             // eigenvalues per shift-invert slice
    double memory_budget = 1.5e9;  // bytes for one slice's Krylov basis
    int max_restarts = 80;
    double residual_tolerance = 1e-8;
    int trace_eigen_limit = 512;   // trace by eigenvalues up to this many
    double trace_tolerance = 1e-6; // relative, counting-function integration
};

/// One factorization attempt: the shift asked for and the shift used.
struct ShiftRecord {
    double requested = 0.0;
    double used = 0.0;
    int retries = 0;
    long negatives = 0;
};

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXcd vector;
    double residual = 0.0; // ||H u - lambda u|| with ||u|| = 1
};

struct SpectralSlice {
    Interval interval;
    long count = 0;
    std::string method = "inertia";
    std::vector<EigenPair> pairs;
    std::vector<ShiftRecord> shift_log;
    double orthogonality_defect = 0.0; // max |U^H U - I|
    double worst_residual = 0.0;
    int restarts = 0;
};

/// Inertia counts of H - sigma I for one matrix, sharing the symbolic
/// analysis between shifts and applying the retry policy on pivot breakdown:
/// offsets +-1e-8 (1 + |sigma|) 10^r with alternating sign, r = 0..4.
class Slicer {
public:
    explicit Slicer(const SparseHermitian& H, SpectralOptions options = {});

    const SparseHermitian& matrix() const noexcept { return H_; }
    const SpectralOptions& options() const noexcept { return options_; }
    bool dense() const noexcept { return dense_; }

    /// Number of eigenvalues below sigma (possibly perturbed, see the log).
    long negatives(double sigma);
    /// Factorization kept for solves, subject to the same retry policy.
    std::unique_ptr<LdltFactor> factor(double sigma);

    const std::vector<ShiftRecord>& shift_log() const noexcept { return log_; }
    void clear_log() { log_.clear(); }

private:
    const SparseHermitian& H_;
    SpectralOptions options_;
    bool dense_ = false;
    std::shared_ptr<const SymbolicLdlt> symbolic_;
    std::vector<ShiftRecord> log_;
};

/// Number of eigenvalues of H below sigma.
long inertia(const SparseHermitian& H, double sigma, const SpectralOptions& options = {});

/// N([lo, hi]) = inertia(hi) - inertia(lo).
SpectralSlice count_interval(const SparseHermitian& H, const Interval& interval, const SpectralOptions& options = {});
SpectralSlice count_interval(Slicer& slicer, const Interval& interval);

/// Eigenpairs in [lo, hi] by spectrum slicing and block shift-invert Krylov
/// iterations with full reorthogonalization, finished by a Rayleigh-Ritz
/// step over all collected vectors. Throws ConvergenceFailure if the
/// residual or orthogonality bound is not met, ConfigError if the interval
/// holds more than max_m eigenvalues.
SpectralSlice eigenpairs_in_interval(const SparseHermitian& H, const Interval& interval, int max_m,
                                     const SpectralOptions& options = {});
SpectralSlice eigenpairs_in_interval(Slicer& slicer, const Interval& interval, int max_m);

struct TraceResult {
    double value = 0.0;
    std::string method;       // "eigenvalues" or "counting-function"
    long count = 0;           // eigenvalues inside the support
    std::vector<double> eigenvalues;
    int inertia_evaluations = 0;
    double error_bound = 0.0; // counting-function method only
};

enum class TraceMethod { Auto, Eigenvalues, CountingFunction };

/// tr phi(H) by summing phi over the eigenvalues in supp phi, or as
/// -int phi'(lambda) N(lambda) dlambda with N sampled by inertia.
TraceResult trace_phi(const SparseHermitian& H, const TestFunction& phi, const SpectralOptions& options = {},
                      TraceMethod method = TraceMethod::Auto);
TraceResult trace_phi(Slicer& slicer, const TestFunction& phi, TraceMethod method = TraceMethod::Auto);

/// Decay summary of one eigenvector away from K.
struct StateLocalization {
    double eigenvalue = 0.0;
    std::vector<double> weighted_mass; // M(c) for each ladder value
    /// Shell masses fitted as exp(-2 rate d): rate per unit distance, and
    /// c_hat = rate / sqrt(p), the constant c in exp(-2 c sqrt(p) d).
    double rate = 0.0;
    double c_hat = 0.0;
    double fit_r2 = 0.0;
    int fit_points = 0;
    double excluded_mass = 0.0;        // mass on nodes with infinite distance
};

struct LocalizationOptions {
    std::vector<double> c_ladder{0.0, 0.05, 0.1, 0.2, 0.3};
    /// Fit window and shell width in units of sqrt(p) * distance.
    double window_lo = 1.0;
    double window_hi = 4.0;
    double shell_width = 0.25;
    /// Shells whose mass falls below this fraction are left out of the fit.
    double mass_floor = 1e-24;
};

struct LocalizationReport {
    double p = 1.0;
    LocalizationOptions options;
    std::vector<StateLocalization> states;
    /// Fit over the summed density sum_j |u_j|^2 of all states.
    StateLocalization aggregate;
};

/// distance[i] is d(x_i, K) for unknown i (+inf where K is empty).
LocalizationReport localization_metrics(const std::vector<EigenPair>& pairs, const std::vector<double>& distance,
                                        double p, const LocalizationOptions& options = {});

/// max over eigenvalues <= k_max of the distance to the nearest band.
double cluster_distance(const std::vector<double>& eigenvalues, const LandauBandSet& bands, double k_max);

} // namespace landau
