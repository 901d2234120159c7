#include "landau/errors.hpp"
#include "landau/ldlt.hpp"
#include "landau/spectral.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace landau;
using namespace testing_support;

namespace {

SparseHermitian diagonal(std::vector<double> d) {
    SparseHermitian::Builder b(static_cast<int>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) b.add_diagonal(static_cast<int>(i), d[i]);
    return b.build();
}

SpectralOptions sparse_only() {
    SpectralOptions o;
    o.method = InertiaMethod::Sparse;
    return o;
}

// Dirichlet Laplacian -u'' on the unit square with m interior nodes per axis.
SparseHermitian dirichlet_laplacian(int m) {
    const double h = 1.0 / (m + 1);
    SparseHermitian::Builder b(m * m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            const int k = i + m * j;
            b.add_diagonal(k, 4.0 / (h * h));
            if (i > 0) b.add(k, k - 1, -1.0 / (h * h));
            if (j > 0) b.add(k, k - m, -1.0 / (h * h));
        }
    return b.build();
}

double bump(double e, double lo, double hi) {
    const double t = (2.0 * e - lo - hi) / (hi - lo);
    if (std::fabs(t) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

} // namespace

TEST(Inertia, Diagonal) {
    SparseHermitian D = diagonal({1, 2, 3, 4, 5});
    EXPECT_EQ(inertia(D, 3.5), 3);
    EXPECT_EQ(inertia(D, 3.5, sparse_only()), 3);
    EXPECT_EQ(inertia(D, 0.0), 0);
    EXPECT_EQ(inertia(D, 10.0), 5);
}

TEST(Inertia, RandomHermitianMedian) {
    std::mt19937_64 rng(20240601);
    Eigen::MatrixXcd a = random_hermitian(200, rng);
    Eigen::VectorXd w = dense_eigenvalues(a);
    const double sigma = 0.5 * (w(99) + w(100));
    SparseHermitian A = sparse_from_dense(a);
    EXPECT_EQ(inertia(A, sigma), 100);
    EXPECT_EQ(inertia(A, sigma, sparse_only()), 100);
    EXPECT_EQ(dense_inertia(a - sigma * Eigen::MatrixXcd::Identity(200, 200)).negative, 100);
}

TEST(Inertia, DirichletLaplacianFirstMode) {
    const int m = 16;
    const double h = 1.0 / (m + 1);
    auto mode = [&](int i, int j) {
        return (4.0 / (h * h)) * (std::pow(std::sin(i * std::numbers::pi * h / 2), 2) +
                                  std::pow(std::sin(j * std::numbers::pi * h / 2), 2));
    };
    SparseHermitian L = dirichlet_laplacian(m);
    const double sigma = 0.5 * (mode(1, 1) + mode(1, 2));
    EXPECT_EQ(inertia(L, sigma), 1);
    EXPECT_EQ(inertia(L, sigma, sparse_only()), 1);
    // Modes (1,2) and (2,1) are degenerate.
    EXPECT_EQ(inertia(L, 0.5 * (mode(1, 2) + mode(2, 2)), sparse_only()), 3);
}

TEST(Inertia, ShiftOnAnEigenvalueIsRetried) {
    SparseHermitian D = diagonal({1, 2, 3, 4, 5});
    for (auto opt : {SpectralOptions{}, sparse_only()}) {
        Slicer s(D, opt);
        const long n = s.negatives(3.0);
        ASSERT_FALSE(s.shift_log().empty());
        const ShiftRecord& r = s.shift_log().back();
        EXPECT_GE(r.retries, 1);
        EXPECT_NE(r.used, r.requested);
        EXPECT_LE(std::fabs(r.used - 3.0), 1e-7 * 4.0 * 1e4);
        EXPECT_EQ(n, r.used < 3.0 ? 2 : 3);
    }
}

TEST(Inertia, MonotoneInShift) {
    std::mt19937_64 rng(11);
    SparseHermitian A = random_sparse_hermitian(400, 4, rng);
    Slicer s(A, sparse_only());
    long last = -1;
    for (double sigma = A.gershgorin_lower() - 1.0; sigma < A.gershgorin_upper() + 1.0; sigma += 0.37) {
        const long n = s.negatives(sigma);
        EXPECT_GE(n, last);
        last = n;
    }
    EXPECT_EQ(last, 400);
    EXPECT_EQ(s.negatives(A.gershgorin_lower() - 1e-6), 0);
}

TEST(Ldlt, SolveAndInertiaMatchDense) {
    std::mt19937_64 rng(5);
    SparseHermitian A = random_sparse_hermitian(300, 3, rng);
    auto sym = std::make_shared<const SymbolicLdlt>(A);
    std::vector<int> perm = sym->permutation();
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> ident(300);
    std::iota(ident.begin(), ident.end(), 0);
    EXPECT_EQ(sorted, ident);

    const double shift = 0.3;
    LdltFactor f(sym, A, shift);
    Eigen::MatrixXcd dense = A.to_dense() - shift * Eigen::MatrixXcd::Identity(300, 300);
    Eigen::VectorXcd b = Eigen::VectorXcd::Random(300);
    Eigen::VectorXcd x = f.solve(b);
    EXPECT_LE((dense * x - b).norm(), 1e-9 * b.norm() * dense.norm());
    Eigen::VectorXd w = dense_eigenvalues(A.to_dense());
    EXPECT_EQ(f.inertia().negative, count_below(w, shift));
    EXPECT_EQ(f.inertia().negative + f.inertia().positive + f.inertia().zero, 300);
}

TEST(Ldlt, NestedDissectionOnLattice) {
    SparseHermitian L = dirichlet_laplacian(40);
    auto perm = nested_dissection(L);
    std::vector<char> seen(perm.size(), 0);
    for (int v : perm) {
        ASSERT_GE(v, 0);
        ASSERT_LT(v, 1600);
        EXPECT_FALSE(seen[v]);
        seen[v] = 1;
    }
    SymbolicLdlt sym(L);
    // Far below the dense n^2 / 2.
    EXPECT_LT(sym.factor_entries(), 1600L * 1600L / 10);
}

TEST(Count, Diagonal) {
    EXPECT_EQ(count_interval(diagonal({1, 2, 3, 4, 5}), {1.5, 4.5}).count, 3);
    EXPECT_EQ(count_interval(diagonal({1, 2, 3, 4, 5}), {1.5, 4.5}, sparse_only()).count, 3);
}

TEST(Count, LandauDegeneracy) {
    ModelSpec m = unit_torus();
    for (int p : {4, 8, 16}) {
        SparseHermitian H = operator_for(m, 128, p);
        EXPECT_EQ(count_interval(H, {0.5, 1.5}).count, p);
        EXPECT_EQ(count_interval(H, {1.5, 2.5}).count, 0);
    }
    // Dense oracle at p = 4 on the smallest gate-respecting lattice.
    SparseHermitian H = operator_for(m, 48, 4);
    Eigen::VectorXd w = dense_eigenvalues(H.to_dense());
    EXPECT_EQ(count_below(w, 1.5) - count_below(w, 0.5), 4);
    EXPECT_EQ(count_interval(H, {0.5, 1.5}).count, 4);
}

TEST(Count, AdditiveOverAdjacentIntervals) {
    SparseHermitian H = operator_for(variable_torus(), 64, 6);
    Slicer s(H);
    const long whole = count_interval(s, {0.5, 3.0}).count;
    const long left = count_interval(s, {0.5, 1.7}).count;
    const long right = count_interval(s, {1.7, 3.0}).count;
    EXPECT_EQ(left + right, whole);
    EXPECT_EQ(count_interval(s, {H.gershgorin_lower() - 2.0, H.gershgorin_lower() - 1.0}).count, 0);
}

TEST(Count, GapCountMatchesExtraction) {
    ModelSpec m = variable_torus();
    const int p = 16;
    auto cells = cells_for_resolution(m.domain, p, 1.3, 8.0);
    SparseHermitian H = operator_for(m, cells[0], p);
    Slicer s(H);
    const Interval gap{1.35, 2.05};
    const long n = count_interval(s, gap).count;
    SpectralSlice e = eigenpairs_in_interval(s, gap, 200);
    EXPECT_EQ(static_cast<long>(e.pairs.size()), n);
    for (const auto& pr : e.pairs) EXPECT_TRUE(gap.contains(pr.value));
}

TEST(Eigen, DiagonalPairs) {
    for (auto opt : {SpectralOptions{}, sparse_only()}) {
        SpectralSlice s = eigenpairs_in_interval(diagonal({1, 2, 3, 4, 5}), {1.5, 4.5}, 10, opt);
        ASSERT_EQ(s.pairs.size(), 3u);
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(s.pairs[j].value, 2.0 + j, 1e-12);
            EXPECT_NEAR(std::abs(s.pairs[j].vector(j + 1)), 1.0, 1e-10);
            EXPECT_NEAR(s.pairs[j].vector.norm(), 1.0, 1e-12);
        }
    }
}

TEST(Eigen, TooManyEigenvalues) {
    EXPECT_THROW(eigenpairs_in_interval(diagonal({1, 2, 3, 4, 5}), {0.5, 5.5}, 3), ConfigError);
}

TEST(Eigen, RandomSparseCrossValidation) {
    std::mt19937_64 rng(424242);
    SpectralOptions opt = sparse_only();
    opt.dense_threshold = 0;
    for (int instance = 0; instance < 20; ++instance) {
        const int n = 300 + 15 * instance;
        SparseHermitian A = random_sparse_hermitian(n, 3, rng);
        const Interval iv{-1.0, 1.5};
        Slicer s(A, opt);
        const long count = count_interval(s, iv).count;
        SpectralSlice e = eigenpairs_in_interval(s, iv, n);
        ASSERT_EQ(static_cast<long>(e.pairs.size()), count) << "instance " << instance;

        Eigen::VectorXd w = dense_eigenvalues(A.to_dense());
        EXPECT_EQ(count_below(w, iv.hi) - count_below(w, iv.lo), count);
        std::vector<double> oracle;
        for (double x : w)
            if (iv.contains(x)) oracle.push_back(x);
        for (std::size_t j = 0; j < oracle.size(); ++j) EXPECT_NEAR(e.pairs[j].value, oracle[j], 1e-9);
        EXPECT_LE(e.worst_residual, 1e-8);
        EXPECT_LE(e.orthogonality_defect, 1e-8);
    }
}

TEST(Eigen, LandauClusterPairs) {
    SparseHermitian H = operator_for(unit_torus(), 128, 8);
    SpectralSlice s = eigenpairs_in_interval(H, {0.5, 1.5}, 64);
    ASSERT_EQ(s.pairs.size(), 8u);
    for (const auto& pr : s.pairs) {
        EXPECT_NEAR(pr.value, 1.0, 0.02);
        EXPECT_LE(pr.residual, 1e-8);
        EXPECT_LE((H * pr.vector - pr.value * pr.vector).norm(), 1e-8);
    }
    EXPECT_LE(s.orthogonality_defect, 1e-8);
    Eigen::MatrixXcd U(H.size(), 8);
    for (int j = 0; j < 8; ++j) U.col(j) = s.pairs[j].vector;
    EXPECT_LE((U.adjoint() * U - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Trace, Diagonal) {
    TestFunction phi({1.5, 4.5});
    const double expect = bump(2, 1.5, 4.5) + bump(3, 1.5, 4.5) + bump(4, 1.5, 4.5);
    TraceResult t = trace_phi(diagonal({1, 2, 3, 4, 5}), phi);
    EXPECT_NEAR(t.value, expect, 1e-14);
    EXPECT_EQ(t.method, "eigenvalues");
    EXPECT_EQ(t.count, 3);
    TraceResult c = trace_phi(diagonal({1, 2, 3, 4, 5}), phi, {}, TraceMethod::CountingFunction);
    EXPECT_EQ(c.method, "counting-function");
    EXPECT_NEAR(c.value, expect, 1e-6 * expect);
}

TEST(Trace, LandauClusterBothMethods) {
    SparseHermitian H = operator_for(unit_torus(), 128, 16);
    TestFunction phi({0.5, 1.5});
    TraceResult e = trace_phi(H, phi, {}, TraceMethod::Eigenvalues);
    TraceResult c = trace_phi(H, phi, {}, TraceMethod::CountingFunction);
    ASSERT_EQ(e.eigenvalues.size(), 16u);
    double mean = 0.0;
    for (double x : e.eigenvalues) mean += x / 16.0;
    EXPECT_NEAR(e.value, 16.0 * phi(mean), 16.0 * 1e-3);
    EXPECT_NEAR(mean, 1.0, 0.02);
    EXPECT_NEAR(c.value, e.value, 1e-6 * e.value);
    EXPECT_NEAR(e.value, 16.0, 0.05 * 16.0);
}

TEST(Trace, GapIsZero) {
    SparseHermitian H = operator_for(unit_torus(), 128, 8);
    EXPECT_EQ(trace_phi(H, TestFunction({1.5, 2.5})).value, 0.0);
    EXPECT_EQ(trace_phi(H, TestFunction({1.5, 2.5}), {}, TraceMethod::CountingFunction).value, 0.0);
}

TEST(Localization, WholeDomainAndZeroWeight) {
    SparseHermitian H = operator_for(unit_torus(), 64, 4);
    SpectralSlice s = eigenpairs_in_interval(H, {0.5, 1.5}, 16);
    std::vector<double> zero(static_cast<std::size_t>(H.size()), 0.0);
    LocalizationReport r = localization_metrics(s.pairs, zero, 4.0);
    ASSERT_EQ(r.states.size(), 4u);
    for (const auto& st : r.states)
        for (double m : st.weighted_mass) EXPECT_NEAR(m, 1.0, 1e-12);
}

TEST(Localization, RatesFromSyntheticProfile) {
    // u(x) = exp(-q d(x)) on a line of unknowns: shell masses decay like
    // exp(-2 q d), so the fitted rate is q.
    const int n = 4000;
    const double h = 0.005;
    const double p = 16.0, q = 3.0;
    std::vector<double> d(n);
    EigenPair pr;
    pr.vector.resize(n);
    for (int i = 0; i < n; ++i) {
        d[i] = i * h;
        pr.vector(i) = std::exp(-q * d[i]);
    }
    pr.vector.normalize();
    LocalizationReport r = localization_metrics({pr}, d, p);
    ASSERT_EQ(r.states.size(), 1u);
    EXPECT_NEAR(r.states[0].rate, q, 0.02 * q);
    EXPECT_NEAR(r.states[0].c_hat, q / std::sqrt(p), 0.02 * q);
    EXPECT_NEAR(r.states[0].weighted_mass[0], 1.0, 1e-12);
    const auto& m = r.states[0].weighted_mass;
    for (std::size_t i = 1; i < m.size(); ++i) EXPECT_GE(m[i], m[i - 1]);
    EXPECT_EQ(r.states[0].excluded_mass, 0.0);

    d[0] = std::numeric_limits<double>::infinity();
    LocalizationReport flagged = localization_metrics({pr}, d, p);
    EXPECT_NEAR(flagged.states[0].excluded_mass, std::norm(pr.vector(0)), 1e-15);
}

TEST(Cluster, Distance) {
    LandauBandSet set;
    set.bands = {{MultiIndex{{0}}, 1.0, 1.0}, {MultiIndex{{1}}, 3.0, 3.0}};
    EXPECT_EQ(cluster_distance({1.0, 3.0}, set, 4.0), 0.0);
    LandauBandSet one;
    one.bands = {{MultiIndex{{0}}, 1.0, 1.0}};
    EXPECT_NEAR(cluster_distance({1.1}, one, 4.0), 0.1, 1e-15);
    EXPECT_EQ(cluster_distance({1.0, 7.0}, one, 4.0), 0.0);
}
