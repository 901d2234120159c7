#include "landau/spectral.hpp"

#include "landau/errors.hpp"
#include "landau/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace landau {

namespace {

constexpr int kMaxShiftRetries = 5;

double retry_offset(double sigma, int attempt) {
    if (attempt == 0) return 0.0;
    const double magnitude = 1e-8 * (1.0 + std::fabs(sigma)) * std::pow(10.0, attempt - 1);
    return attempt % 2 == 1 ? magnitude : -magnitude;
}

Eigen::MatrixXcd random_block(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXcd X(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) X(r, c) = {gauss(rng), gauss(rng)};
    return X;
}

// Column-wise Gram-Schmidt with reorthogonalization; columns that vanish are
// replaced by random directions.
void orthonormalize_columns(Eigen::Ref<Eigen::MatrixXcd> W, const Eigen::Ref<const Eigen::MatrixXcd>& basis,
                            std::mt19937_64& rng) {
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = W.col(c).norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (basis.cols() > 0) W.col(c) -= basis * (basis.adjoint() * W.col(c));
                if (c > 0) W.col(c) -= W.leftCols(c) * (W.leftCols(c).adjoint() * W.col(c));
            }
            const double after = W.col(c).norm();
            if (after > 1e-10 * before && after > 0.0) {
                W.col(c) /= after;
                break;
            }
            W.col(c) = random_block(W.rows(), 1, rng);
        }
    }
}

// Block orthonormalization against `basis` (orthonormal columns) by two
// passes of classical Gram-Schmidt and Cholesky QR, falling back to the
// column-wise variant when the block is nearly rank deficient.
void orthonormalize(Eigen::Ref<Eigen::MatrixXcd> W, const Eigen::Ref<const Eigen::MatrixXcd>& basis,
                    std::mt19937_64& rng) {
    for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) {
            const Eigen::MatrixXcd C = basis.adjoint() * W;
            W.noalias() -= basis * C;
        }
        const Eigen::MatrixXcd G = W.adjoint() * W;
        Eigen::LLT<Eigen::MatrixXcd> llt(G);
        const auto diag = G.diagonal().real();
        if (llt.info() != Eigen::Success || diag.minCoeff() <= 0.0) {
            orthonormalize_columns(W, basis, rng);
            return;
        }
        const Eigen::MatrixXcd L = llt.matrixL();
        const double lmin = L.diagonal().real().minCoeff(), lmax = L.diagonal().real().maxCoeff();
        if (lmin < 1e-7 * lmax) {
            orthonormalize_columns(W, basis, rng);
            return;
        }
        L.triangularView<Eigen::Lower>().adjoint().solveInPlace<Eigen::OnTheRight>(W);
    }
}

double orthogonality_defect(const Eigen::MatrixXcd& U) {
    if (U.cols() == 0) return 0.0;
    const Eigen::MatrixXcd G = U.adjoint() * U - Eigen::MatrixXcd::Identity(U.cols(), U.cols());
    return G.cwiseAbs().maxCoeff();
}

struct RitzSet {
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
    Eigen::VectorXd residuals;
};

// Rayleigh-Ritz of H on the orthonormal columns of V, keeping the `keep`
// Ritz pairs closest to sigma (all when keep < 0), ordered by value.
RitzSet rayleigh_ritz(const SparseHermitian& H, const Eigen::MatrixXcd& V, double sigma, Eigen::Index keep) {
    const Eigen::Index m = V.cols();
    Eigen::MatrixXcd G(m, m);
    const Eigen::Index chunk = 32;
    for (Eigen::Index c = 0; c < m; c += chunk) {
        const Eigen::Index w = std::min(chunk, m - c);
        const Eigen::MatrixXcd HV = H.apply(V.middleCols(c, w));
        G.middleCols(c, w).noalias() = V.adjoint() * HV;
    }
    G = 0.5 * (G + G.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    if (keep >= 0 && keep < m) {
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return std::fabs(es.eigenvalues()(a) - sigma) < std::fabs(es.eigenvalues()(b) - sigma);
        });
        order.resize(static_cast<std::size_t>(keep));
        std::sort(order.begin(), order.end());
    }
    RitzSet out;
    const auto k = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXcd Y(m, k);
    out.values.resize(k);
    for (Eigen::Index t = 0; t < k; ++t) {
        Y.col(t) = es.eigenvectors().col(order[static_cast<std::size_t>(t)]);
        out.values(t) = es.eigenvalues()(order[static_cast<std::size_t>(t)]);
    }
    out.vectors.noalias() = V * Y;
    Eigen::MatrixXcd R = H.apply(out.vectors);
    out.residuals.resize(k);
    for (Eigen::Index t = 0; t < k; ++t) {
        R.col(t) -= out.values(t) * out.vectors.col(t);
        out.residuals(t) = R.col(t).norm() / out.vectors.col(t).norm();
    }
    return out;
}

struct Leaf {
    double lo, hi;
    long count;
};

// Eigenpairs of one slice by restarted block shift-invert Krylov iteration.
RitzSet solve_slice(Slicer& slicer, const Leaf& leaf, std::mt19937_64& rng, int& restarts_used) {
    const SparseHermitian& H = slicer.matrix();
    const SpectralOptions& opt = slicer.options();
    const Eigen::Index n = H.size();
    const double sigma = 0.5 * (leaf.lo + leaf.hi);
    const std::unique_ptr<LdltFactor> factor = slicer.factor(sigma);
    const double used = factor->shift();

    // The block must hold every eigenvalue at least as close to sigma as the
    // slice edges, or the edge eigenvalues converge at a ratio near one; size
    // it from the count in the slice widened on both sides, narrowing the
    // margin when a dense cluster nearby would overrun the memory budget.
    const long affordable = std::max<long>(leaf.count + 4, static_cast<long>(opt.memory_budget / (48.0 * n)));
    long wide = leaf.count;
    for (double fraction : {0.5, 0.25, 0.1}) {
        const double margin = fraction * (leaf.hi - leaf.lo);
        const long c = slicer.negatives(leaf.hi + margin) - slicer.negatives(leaf.lo - margin);
        if (c + 4 <= affordable) {
            wide = c;
            break;
        }
    }
    Eigen::Index k = std::min<Eigen::Index>(n, std::max(wide, leaf.count) + 4);
    int steps = 2;
    while (steps > 1 && k * (steps + 1) > n) --steps;
    if (k * (steps + 1) > n) {
        // The Krylov basis would not fit in the space: solve directly.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.to_dense());
        std::vector<Eigen::Index> keep;
        for (Eigen::Index t = 0; t < n; ++t)
            if (es.eigenvalues()(t) >= leaf.lo && es.eigenvalues()(t) <= leaf.hi) keep.push_back(t);
        if (static_cast<long>(keep.size()) != leaf.count)
            throw ConvergenceFailure("dense eigensolver and inertia disagree on [" + std::to_string(leaf.lo) + ", " +
                                         std::to_string(leaf.hi) + "]",
                                     0, 0.0);
        RitzSet out;
        out.values.resize(leaf.count);
        out.vectors.resize(n, leaf.count);
        out.residuals.resize(leaf.count);
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            out.values(c) = es.eigenvalues()(keep[j]);
            out.vectors.col(c) = es.eigenvectors().col(keep[j]);
            out.residuals(c) = (H * out.vectors.col(c) - out.values(c) * out.vectors.col(c)).norm();
        }
        restarts_used = 0;
        return out;
    }

    Eigen::MatrixXcd V(n, k * (steps + 1));
    V.leftCols(k) = random_block(n, k, rng);
    orthonormalize(V.leftCols(k), V.leftCols(0), rng);
    const double tol = 0.1 * opt.residual_tolerance;
    double worst = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < opt.max_restarts; ++restart) {
        restarts_used = restart + 1;
        for (int s = 1; s <= steps; ++s) {
            Eigen::MatrixXcd W = V.middleCols((s - 1) * k, k);
            factor->solve(W);
            orthonormalize(W, V.leftCols(s * k), rng);
            V.middleCols(s * k, k) = W;
        }
        RitzSet ritz = rayleigh_ritz(H, V, used, k);
        // Unconverged Ritz values of the outer basis vectors may land inside
        // the slice; only converged pairs count, and inertia says how many.
        auto accepted = [&](Eigen::Index t) {
            return ritz.residuals(t) <= tol && ritz.values(t) >= leaf.lo && ritz.values(t) <= leaf.hi;
        };
        long converged = 0;
        worst = 0.0;
        for (Eigen::Index t = 0; t < ritz.values.size(); ++t) {
            if (accepted(t)) ++converged;
            else if (ritz.values(t) >= leaf.lo && ritz.values(t) <= leaf.hi) worst = std::max(worst, ritz.residuals(t));
        }
        if (converged == leaf.count) {
            RitzSet out;
            out.values.resize(leaf.count);
            out.vectors.resize(n, leaf.count);
            out.residuals.resize(leaf.count);
            Eigen::Index j = 0;
            for (Eigen::Index t = 0; t < ritz.values.size(); ++t) {
                if (!accepted(t)) continue;
                out.values(j) = ritz.values(t);
                out.vectors.col(j) = ritz.vectors.col(t);
                out.residuals(j) = ritz.residuals(t);
                ++j;
            }
            return out;
        }
        V.leftCols(k) = ritz.vectors;
        orthonormalize(V.leftCols(k), V.leftCols(0), rng);
    }
    std::ostringstream os;
    os << "shift-invert iteration on [" << leaf.lo << ", " << leaf.hi << "] did not converge ("
       << leaf.count << " eigenvalues expected)";
    throw ConvergenceFailure(os.str(), opt.max_restarts, worst);
}

double pairwise(std::vector<double> v) {
    return pairwise_sum(v.size(), [&](std::size_t i) { return v[i]; });
}

} // namespace

// --- Slicer -----------------------------------------------------------------------

Slicer::Slicer(const SparseHermitian& H, SpectralOptions options) : H_(H), options_(options) {
    dense_ = options_.method == InertiaMethod::Dense ||
             (options_.method == InertiaMethod::Auto && H.size() <= options_.dense_threshold);
}

long Slicer::negatives(double sigma) {
    for (int attempt = 0; attempt <= kMaxShiftRetries; ++attempt) {
        const double s = sigma + retry_offset(sigma, attempt);
        try {
            long neg = 0;
            if (dense_) {
                Eigen::MatrixXcd A = H_.to_dense();
                A.diagonal().array() -= s;
                neg = dense_inertia(A, options_.pivot_tolerance).negative;
            } else {
                if (!symbolic_) symbolic_ = std::make_shared<SymbolicLdlt>(H_);
                LdltOptions lo;
                lo.keep_factor = false;
                lo.pivot_tolerance = options_.pivot_tolerance;
                neg = LdltFactor(symbolic_, H_, s, lo).inertia().negative;
            }
            log_.push_back({sigma, s, attempt, neg});
            return neg;
        } catch (const ShiftTooClose&) {
        }
    }
    std::ostringstream os;
    os << "factorization of H - sigma I broke down for sigma = " << sigma << " and all " << kMaxShiftRetries
       << " perturbed shifts";
    throw FactorizationFailure(os.str());
}

std::unique_ptr<LdltFactor> Slicer::factor(double sigma) {
    if (!symbolic_) symbolic_ = std::make_shared<SymbolicLdlt>(H_);
    for (int attempt = 0; attempt <= kMaxShiftRetries; ++attempt) {
        const double s = sigma + retry_offset(sigma, attempt);
        try {
            LdltOptions lo;
            lo.pivot_tolerance = options_.pivot_tolerance;
            auto f = std::make_unique<LdltFactor>(symbolic_, H_, s, lo);
            log_.push_back({sigma, s, attempt, f->inertia().negative});
            return f;
        } catch (const ShiftTooClose&) {
        }
    }
    std::ostringstream os;
    os << "factorization of H - sigma I broke down for sigma = " << sigma << " and all perturbed shifts";
    throw FactorizationFailure(os.str());
}

long inertia(const SparseHermitian& H, double sigma, const SpectralOptions& options) {
    Slicer slicer(H, options);
    return slicer.negatives(sigma);
}

// --- counting ---------------------------------------------------------------------

SpectralSlice count_interval(Slicer& slicer, const Interval& interval) {
    if (!(interval.lo < interval.hi)) throw ConfigError("interval must satisfy lo < hi");
    SpectralSlice slice;
    slice.interval = interval;
    const std::size_t mark = slicer.shift_log().size();
    long lo = 0, hi = 0;
    try {
        lo = slicer.negatives(interval.lo);
    } catch (const FactorizationFailure& e) {
        throw FactorizationFailure(std::string("lower endpoint: ") + e.what());
    }
    try {
        hi = slicer.negatives(interval.hi);
    } catch (const FactorizationFailure& e) {
        throw FactorizationFailure(std::string("upper endpoint: ") + e.what());
    }
    slice.count = hi - lo;
    slice.shift_log.assign(slicer.shift_log().begin() + static_cast<std::ptrdiff_t>(mark), slicer.shift_log().end());
    return slice;
}

SpectralSlice count_interval(const SparseHermitian& H, const Interval& interval, const SpectralOptions& options) {
    Slicer slicer(H, options);
    return count_interval(slicer, interval);
}

// --- eigenpairs -------------------------------------------------------------------

SpectralSlice eigenpairs_in_interval(Slicer& slicer, const Interval& interval, int max_m) {
    const SparseHermitian& H = slicer.matrix();
    const SpectralOptions& opt = slicer.options();
    const std::size_t mark = slicer.shift_log().size();
    SpectralSlice slice = count_interval(slicer, interval);
    slice.method = "eigenpairs";
    const long lo_count = slicer.shift_log()[mark].negatives;
    if (slice.count > max_m) {
        std::ostringstream os;
        os << slice.count << " eigenvalues in [" << interval.lo << ", " << interval.hi << "] exceed max_m = " << max_m;
        throw ConfigError(os.str());
    }
    if (slice.count == 0) return slice;

    const Eigen::Index n = H.size();
    Eigen::MatrixXcd U;
    Eigen::VectorXd values;
    if (slicer.dense()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.to_dense());
        values = es.eigenvalues().segment(lo_count, slice.count);
        U = es.eigenvectors().middleCols(lo_count, slice.count);
    } else {
        // Bisect until every leaf holds at most slice_max eigenvalues, fewer
        // when the Krylov basis of a leaf would not fit the memory budget.
        const double per_column = 16.0 * 3.0 * static_cast<double>(n);
        const long affordable = static_cast<long>((opt.memory_budget / per_column - 4.0) / 2.0);
        const long slice_max = std::max<long>(4, std::min<long>(opt.slice_max, affordable));
        std::vector<Leaf> leaves;
        std::vector<Leaf> stack{{interval.lo, interval.hi, slice.count}};
        std::vector<long> below{lo_count};
        while (!stack.empty()) {
            Leaf leaf = stack.back();
            stack.pop_back();
            const long base = below.back();
            below.pop_back();
            const double width = leaf.hi - leaf.lo;
            if (leaf.count == 0) continue;
            if (leaf.count <= slice_max || width < 1e-9 * (1.0 + std::fabs(leaf.lo) + std::fabs(leaf.hi))) {
                leaves.push_back(leaf);
                continue;
            }
            const double mid = 0.5 * (leaf.lo + leaf.hi);
            const long nm = slicer.negatives(mid);
            // Upper half first on the stack so leaves come out in ascending order.
            stack.push_back({mid, leaf.hi, leaf.count - (nm - base)});
            below.push_back(nm);
            stack.push_back({leaf.lo, mid, nm - base});
            below.push_back(base);
        }
        U.resize(n, slice.count);
        values.resize(slice.count);
        Eigen::Index filled = 0;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            std::mt19937_64 rng(opt.seed + 7919 * i);
            int restarts = 0;
            const RitzSet r = solve_slice(slicer, leaves[i], rng, restarts);
            slice.restarts += restarts;
            U.middleCols(filled, r.values.size()) = r.vectors;
            values.segment(filled, r.values.size()) = r.values;
            filled += r.values.size();
        }
        // One Rayleigh-Ritz step over every slice restores orthogonality
        // between vectors found with different shifts.
        std::mt19937_64 rng(opt.seed);
        orthonormalize(U, U.leftCols(0), rng);
        const RitzSet all = rayleigh_ritz(H, U, interval.mid(), -1);
        U = all.vectors;
        values = all.values;
    }

    slice.pairs.resize(static_cast<std::size_t>(slice.count));
    for (Eigen::Index j = 0; j < slice.count; ++j) {
        EigenPair& pr = slice.pairs[static_cast<std::size_t>(j)];
        pr.value = values(j);
        pr.vector = U.col(j);
        const Eigen::VectorXcd r = H * pr.vector - pr.value * pr.vector;
        pr.residual = r.norm() / pr.vector.norm();
        slice.worst_residual = std::max(slice.worst_residual, pr.residual);
    }
    slice.orthogonality_defect = orthogonality_defect(U);
    slice.shift_log.assign(slicer.shift_log().begin() + static_cast<std::ptrdiff_t>(mark), slicer.shift_log().end());
    if (slice.worst_residual > opt.residual_tolerance || slice.orthogonality_defect > opt.residual_tolerance) {
        std::ostringstream os;
        os << "eigenpairs in [" << interval.lo << ", " << interval.hi << "] miss the bounds: worst residual "
           << slice.worst_residual << ", orthogonality defect " << slice.orthogonality_defect;
        throw ConvergenceFailure(os.str(), slice.restarts, slice.worst_residual);
    }
    return slice;
}

SpectralSlice eigenpairs_in_interval(const SparseHermitian& H, const Interval& interval, int max_m,
                                     const SpectralOptions& options) {
    Slicer slicer(H, options);
    return eigenpairs_in_interval(slicer, interval, max_m);
}

// --- trace -----------------------------------------------------------------------

TraceResult trace_phi(Slicer& slicer, const TestFunction& phi, TraceMethod method) {
    const SpectralOptions& opt = slicer.options();
    const Interval supp = phi.support();
    TraceResult result;
    const std::size_t mark = slicer.shift_log().size();
    const long n_lo = slicer.negatives(supp.lo);
    const long n_hi = slicer.negatives(supp.hi);
    result.count = n_hi - n_lo;
    if (method == TraceMethod::Auto)
        method = result.count <= opt.trace_eigen_limit ? TraceMethod::Eigenvalues : TraceMethod::CountingFunction;

    if (method == TraceMethod::Eigenvalues) {
        result.method = "eigenvalues";
        const SpectralSlice slice = eigenpairs_in_interval(slicer, supp, static_cast<int>(std::max<long>(result.count, 1)));
        for (const auto& pr : slice.pairs) result.eigenvalues.push_back(pr.value);
        std::vector<double> terms;
        for (double l : result.eigenvalues) terms.push_back(phi(l));
        result.value = pairwise(terms);
        result.inertia_evaluations = static_cast<int>(slicer.shift_log().size() - mark);
        return result;
    }

    // Counting function: on a piece [a, b] where N is constant the integral of
    // -phi' N is exactly N (phi(a) - phi(b)). Pieces holding eigenvalues are
    // bisected until the uncertainty of where they sit is below tolerance.
    result.method = "counting-function";
    struct Piece {
        double a, b;
        long na, nb; // eigenvalues in [supp.lo, a) and [supp.lo, b)
        double bound;
    };
    auto slope_bound = [&](double a, double b) {
        double m = 0.0;
        for (int i = 0; i <= 16; ++i) m = std::max(m, std::fabs(phi.derivative(a + (b - a) * i / 16.0)));
        return 1.5 * m;
    };
    auto make = [&](double a, double b, long na, long nb) {
        Piece pc{a, b, na, nb, 0.0};
        if (nb != na) pc.bound = static_cast<double>(nb - na) * slope_bound(a, b) * 0.5 * (b - a);
        return pc;
    };
    auto cmp = [](const Piece& x, const Piece& y) { return x.bound < y.bound; };
    std::priority_queue<Piece, std::vector<Piece>, decltype(cmp)> open(cmp);
    std::vector<Piece> done;
    const int initial = 16;
    long prev = 0;
    double prev_x = supp.lo;
    for (int i = 1; i <= initial; ++i) {
        const double x = supp.lo + supp.width() * i / initial;
        const long nx = i == initial ? n_hi - n_lo : slicer.negatives(x) - n_lo;
        open.push(make(prev_x, x, prev, nx));
        prev = nx;
        prev_x = x;
    }
    auto value_of = [&](const Piece& pc) {
        if (pc.na == pc.nb) return static_cast<double>(pc.na) * (phi(pc.a) - phi(pc.b));
        const double m = 0.5 * (pc.a + pc.b);
        return static_cast<double>(pc.na) * (phi(pc.a) - phi(m)) + static_cast<double>(pc.nb) * (phi(m) - phi(pc.b));
    };
    for (;;) {
        double total = 0.0, bound = 0.0;
        std::vector<Piece> all = done;
        auto copy = open;
        while (!copy.empty()) {
            all.push_back(copy.top());
            copy.pop();
        }
        std::sort(all.begin(), all.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
        std::vector<double> parts;
        for (const auto& pc : all) {
            parts.push_back(value_of(pc));
            bound += pc.bound;
        }
        total = pairwise(parts);
        result.value = total;
        result.error_bound = bound;
        if (open.empty() || bound <= opt.trace_tolerance * std::max(std::fabs(total), 1e-300)) break;
        Piece worst = open.top();
        open.pop();
        if (worst.bound == 0.0 || worst.b - worst.a < 1e-12 * (1.0 + std::fabs(worst.a))) {
            done.push_back(worst);
            continue;
        }
        const double m = 0.5 * (worst.a + worst.b);
        const long nm = slicer.negatives(m) - n_lo;
        for (const Piece& pc : {make(worst.a, m, worst.na, nm), make(m, worst.b, nm, worst.nb)})
            (pc.bound == 0.0 ? done.push_back(pc) : open.push(pc));
    }
    result.inertia_evaluations = static_cast<int>(slicer.shift_log().size() - mark);
    return result;
}

TraceResult trace_phi(const SparseHermitian& H, const TestFunction& phi, const SpectralOptions& options,
                      TraceMethod method) {
    Slicer slicer(H, options);
    return trace_phi(slicer, phi, method);
}

// --- localization ------------------------------------------------------------------

namespace {

StateLocalization localize(const std::vector<double>& density, const std::vector<double>& distance, double p,
                           const LocalizationOptions& opt) {
    StateLocalization st;
    const double sp = std::sqrt(p);
    double total = 0.0;
    for (double w : density) total += w;
    std::vector<double> finite_mass;
    std::vector<double> shells;
    for (std::size_t i = 0; i < density.size(); ++i) {
        const double w = density[i] / total;
        if (!std::isfinite(distance[i])) {
            st.excluded_mass += w;
            continue;
        }
        const auto bin = static_cast<std::size_t>(sp * distance[i] / opt.shell_width);
        if (bin >= shells.size()) shells.resize(bin + 1, 0.0);
        shells[bin] += w;
    }
    for (double c : opt.c_ladder) {
        std::vector<double> terms;
        terms.reserve(density.size());
        for (std::size_t i = 0; i < density.size(); ++i)
            if (std::isfinite(distance[i])) terms.push_back(std::exp(2.0 * c * sp * distance[i]) * density[i] / total);
        st.weighted_mass.push_back(pairwise(terms));
    }
    std::vector<double> xs, ys;
    for (std::size_t b = 0; b < shells.size(); ++b) {
        const double x = (static_cast<double>(b) + 0.5) * opt.shell_width;
        if (x < opt.window_lo || x > opt.window_hi) continue;
        if (!(shells[b] > opt.mass_floor)) continue;
        xs.push_back(x);
        ys.push_back(std::log(shells[b]));
    }
    const LinearFit fit = linear_fit(xs, ys);
    st.fit_points = fit.points;
    st.fit_r2 = fit.r2;
    st.c_hat = -0.5 * fit.slope;
    st.rate = st.c_hat * sp;
    return st;
}

} // namespace

LocalizationReport localization_metrics(const std::vector<EigenPair>& pairs, const std::vector<double>& distance,
                                        double p, const LocalizationOptions& options) {
    LocalizationReport report;
    report.p = p;
    report.options = options;
    std::vector<double> aggregate(distance.size(), 0.0);
    for (const auto& pr : pairs) {
        if (static_cast<std::size_t>(pr.vector.size()) != distance.size())
            throw ConfigError("distance field and eigenvector sizes differ");
        std::vector<double> density(distance.size());
        for (std::size_t i = 0; i < density.size(); ++i) {
            density[i] = std::norm(pr.vector(static_cast<Eigen::Index>(i)));
            aggregate[i] += density[i];
        }
        StateLocalization st = localize(density, distance, p, options);
        st.eigenvalue = pr.value;
        report.states.push_back(std::move(st));
    }
    if (!pairs.empty()) report.aggregate = localize(aggregate, distance, p, options);
    return report;
}

double cluster_distance(const std::vector<double>& eigenvalues, const LandauBandSet& bands, double k_max) {
    double worst = 0.0;
    for (double e : eigenvalues)
        if (e <= k_max) worst = std::max(worst, bands.distance(e));
    return worst;
}

} // namespace landau
