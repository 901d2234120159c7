#include "landau/errors.hpp"
#include "landau/predictor.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace landau;
using namespace testing_support;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd skew(int d, std::vector<std::array<double, 3>> entries) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
    for (auto [i, j, v] : entries) {
        b(static_cast<int>(i), static_cast<int>(j)) = v;
        b(static_cast<int>(j), static_cast<int>(i)) = -v;
    }
    return b;
}

// Independent bump, written out from its definition.
double bump(double e, double lo, double hi) {
    const double t = (2.0 * e - lo - hi) / (hi - lo);
    if (std::fabs(t) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

double variable_b(double x, double y) {
    const double L = kTorusSide;
    return 1.0 + 0.3 * std::cos(2 * kPi * x / L) * std::cos(2 * kPi * y / L);
}

} // namespace

TEST(Frame, Examples) {
    auto a = frame_eigenvalues(Eigen::MatrixXd::Identity(2, 2), skew(2, {{0, 1, 0.8}}));
    ASSERT_EQ(a.size(), 1u);
    EXPECT_NEAR(a[0], 0.8, 1e-15);

    a = frame_eigenvalues(Eigen::MatrixXd::Identity(4, 4), skew(4, {{0, 1, 2.0}, {2, 3, 1.0}}));
    ASSERT_EQ(a.size(), 2u);
    EXPECT_NEAR(a[0], 1.0, 1e-14);
    EXPECT_NEAR(a[1], 2.0, 1e-14);

    a = frame_eigenvalues(2.0 * Eigen::MatrixXd::Identity(2, 2), skew(2, {{0, 1, 3.0}}));
    EXPECT_NEAR(a[0], 1.5, 1e-14);

    // Negative orientation gives the same modulus.
    a = frame_eigenvalues(Eigen::MatrixXd::Identity(2, 2), skew(2, {{0, 1, -0.5}}));
    EXPECT_NEAR(a[0], 0.5, 1e-15);
}

TEST(Frame, GeneralMetricMatchesCharacteristicPolynomial) {
    // For d = 2, a = |B12| / sqrt(det g).
    Eigen::MatrixXd g(2, 2);
    g << 2.0, 0.5, 0.5, 1.0;
    auto a = frame_eigenvalues(g, skew(2, {{0, 1, 1.7}}));
    EXPECT_NEAR(a[0], 1.7 / std::sqrt(g.determinant()), 1e-14);
}

TEST(Frame, DegenerateField) {
    EXPECT_THROW(frame_eigenvalues(Eigen::MatrixXd::Identity(2, 2), skew(2, {})), DegenerateField);
    EXPECT_THROW(frame_eigenvalues(Eigen::MatrixXd::Identity(4, 4), skew(4, {{0, 1, 1.0}})), DegenerateField);
}

TEST(Levels, Examples) {
    std::vector<double> one{1.0};
    EXPECT_DOUBLE_EQ(landau_level(one, 0.0, MultiIndex{{0}}), 1.0);
    std::vector<double> b{0.8};
    EXPECT_DOUBLE_EQ(landau_level(b, -0.3, MultiIndex{{2}}), 5 * 0.8 - 0.3);
    std::vector<double> two{1.0, 2.0};
    EXPECT_DOUBLE_EQ(landau_level(two, 0.5, MultiIndex{{1, 0}}), 5.5);
}

TEST(Levels, MultiIndexEnumeration) {
    auto ks = enumerate_multi_indices(2, 2);
    ASSERT_EQ(ks.size(), 6u);
    EXPECT_EQ(ks[0].k, (std::vector<int>{0, 0}));
    EXPECT_EQ(ks[1].k, (std::vector<int>{1, 0}));
    EXPECT_EQ(ks[2].k, (std::vector<int>{0, 1}));
    EXPECT_EQ(ks[3].k, (std::vector<int>{2, 0}));
    EXPECT_EQ(ks[5].k, (std::vector<int>{0, 2}));
    EXPECT_EQ(max_level_order(6.0, 1.0, 0.0, 1), 2);
    EXPECT_EQ(max_level_order(0.5, 1.0, 0.0, 1), -1);
}

TEST(Bands, ConstantField) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {16, 16}));
    LandauBandSet set = sigma_bands(s, {}, 6.0);
    ASSERT_EQ(set.bands.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(set.bands[k].k.k, std::vector<int>{k});
        EXPECT_DOUBLE_EQ(set.bands[k].lo, 2 * k + 1.0);
        EXPECT_DOUBLE_EQ(set.bands[k].hi, 2 * k + 1.0);
    }
    ASSERT_EQ(set.gaps.size(), 3u);
    EXPECT_DOUBLE_EQ(set.gaps[0].lo, 1.0);
    EXPECT_DOUBLE_EQ(set.gaps[0].hi, 3.0);
    EXPECT_DOUBLE_EQ(set.gaps[2].lo, 5.0);
    EXPECT_DOUBLE_EQ(set.gaps[2].hi, 6.0);
    EXPECT_DOUBLE_EQ(set.distance(2.5), 0.5);
    EXPECT_DOUBLE_EQ(set.distance(3.0), 0.0);
    EXPECT_TRUE(set.in_gap({1.5, 2.5}));
    EXPECT_FALSE(set.in_gap({0.5, 1.5}));
}

TEST(Bands, VariableField) {
    ModelSpec m = variable_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {64, 64}));
    LandauBandSet set = sigma_bands(s, {}, 4.0);
    ASSERT_GE(set.bands.size(), 2u);
    EXPECT_NEAR(set.bands[0].lo, 0.7, 1e-12);
    EXPECT_NEAR(set.bands[0].hi, 1.3, 1e-12);
    EXPECT_NEAR(set.bands[1].lo, 2.1, 1e-12);
    EXPECT_NEAR(set.bands[1].hi, 3.9, 1e-12);
    ASSERT_FALSE(set.gaps.empty());
    EXPECT_NEAR(set.gaps[0].lo, 1.3, 1e-12);
    EXPECT_NEAR(set.gaps[0].hi, 2.1, 1e-12);
}

TEST(Bands, GapCriterionMatchesFieldRange) {
    // A gap above level k - 1 opens exactly when (2k - 1) sup b < (2k + 1) inf b.
    for (double amp : {0.1, 0.3, 0.45}) {
        ModelSpec m = planar_model(DomainKind::Torus, kTorusSide, 0.0,
                                   "1 + " + std::to_string(amp) + "*cos(2*pi*x1/L)*cos(2*pi*x2/L)", 1.0 - amp);
        FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
        const double lo = s.min_frame(), hi = s.max_frame();
        LandauBandSet set = sigma_bands(s, {}, 12.0);
        for (int k = 1; k <= 3; ++k) {
            const bool expected = (2 * k - 1) * hi < (2 * k + 1) * lo;
            bool found = false;
            for (const auto& g : set.gaps)
                if (std::fabs(g.lo - (2 * k - 1) * hi) < 1e-12 && std::fabs(g.hi - (2 * k + 1) * lo) < 1e-12)
                    found = true;
            EXPECT_EQ(found, expected) << "amp " << amp << " k " << k;
        }
    }
}

TEST(Bands, CollapseAwayFromPotential) {
    ModelSpec m = planar_model(DomainKind::Rectangle, 20.0, -10.0, "1", 1.0, "-exp(-r2/2)");
    Grid g(m.domain, {80, 80});
    FieldSamples s = sample_fields(m, g);
    NodeMask far(s.node_count(), 0);
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        auto x = g.coords(i);
        far[i] = x[0] * x[0] + x[1] * x[1] > 64.0 ? 1 : 0;
    }
    LandauBandSet set = sigma_bands(s, far, 6.0, "far");
    ASSERT_EQ(set.bands.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(set.bands[k].lo, 2 * k + 1.0, 1e-13);
        EXPECT_NEAR(set.bands[k].hi, 2 * k + 1.0, 1e-13);
    }

    LandauBandSet all = sigma_bands(s, {}, 6.0);
    EXPECT_NEAR(all.bands[0].lo, 0.0, 1e-12);
    EXPECT_NEAR(all.bands[0].hi, 1.0, 1e-12);
}

TEST(Bands, EmptyRegion) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {8, 8}));
    EXPECT_THROW(sigma_bands(s, NodeMask(s.node_count(), 0), 4.0), EmptyRegion);
}

TEST(Bands, TruncationIsComplete) {
    // No level beyond the enumerated orders can reach below k_max.
    ModelSpec m = variable_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
    const double kmax = 9.0;
    LandauBandSet set = sigma_bands(s, {}, kmax);
    int top = 0;
    for (const auto& b : set.bands) top = std::max(top, b.k.order());
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        std::vector<int> k{top + 1};
        EXPECT_GT(landau_level(s.frame_at(i), s.potential[i], k), kmax);
    }
}

TEST(KSet, WholeAndEmpty) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {16, 16}));
    KSetField all = k_set(s, {0.5, 1.5});
    EXPECT_FALSE(all.empty);
    for (double d : all.distance) EXPECT_EQ(d, 0.0);

    KSetField none = k_set(s, {1.5, 2.5});
    EXPECT_TRUE(none.empty);
    for (double d : none.distance) EXPECT_TRUE(std::isinf(d));
}

TEST(KSet, DiskDistance) {
    // 3 + V in [1.5, 2.5] with V = -exp(-r^2/2) is the disk r <= sqrt(2 ln 2).
    ModelSpec m = planar_model(DomainKind::Rectangle, 10.0, -5.0, "1", 1.0, "-exp(-r2/2)");
    Grid g(m.domain, {200, 200});
    FieldSamples s = sample_fields(m, g);
    KSetField K = k_set(s, {1.5, 2.5});
    const double R = std::sqrt(2.0 * std::log(2.0));
    const double h = g.spacing()[0];
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        auto x = g.coords(i);
        const double r = std::hypot(x[0], x[1]);
        EXPECT_EQ(K.inside[i] != 0, r <= R + 1e-12);
        EXPECT_NEAR(K.distance[i], std::max(0.0, r - R), 2.0 * h + 0.03 * std::max(0.0, r - R));
    }
    EXPECT_LE(K.triangle_defect, 1e-12);
}

TEST(KSet, TorusDistanceWraps) {
    Domain d{DomainKind::Torus, {1.0, 1.0}, {0.0, 0.0}};
    Grid g(d, {20, 20});
    std::vector<char> mask(g.node_count(), 0);
    mask[0] = 1;
    auto dist = distance_to_mask(g, mask);
    std::vector<int> idx{19, 19};
    EXPECT_NEAR(dist[g.flat_index(idx)], std::sqrt(2.0) * 0.05, 1e-14);
    idx = {10, 0};
    EXPECT_NEAR(dist[g.flat_index(idx)], 0.5, 1e-14);
}

TEST(TestFunctionTest, Shape) {
    TestFunction phi({0.5, 1.5});
    EXPECT_DOUBLE_EQ(phi(1.0), 1.0);
    EXPECT_EQ(phi(0.5), 0.0);
    EXPECT_EQ(phi(1.5), 0.0);
    EXPECT_EQ(phi(2.0), 0.0);
    for (double e = 0.51; e < 1.5; e += 0.01) {
        EXPECT_GT(phi(e), 0.0);
        EXPECT_NEAR(phi(e), bump(e, 0.5, 1.5), 1e-15);
        const double fd = (phi(e + 1e-6) - phi(e - 1e-6)) / 2e-6;
        EXPECT_NEAR(phi.derivative(e), fd, 1e-6 * (1.0 + std::fabs(fd)));
    }
}

TEST(Weyl, MeasureExamples) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
    EXPECT_NEAR(weyl_measure(s, MultiIndex{{0}}, {0.5, 1.5}), 2.0 * kPi, 1e-12);
    EXPECT_EQ(weyl_measure(s, MultiIndex{{0}}, {1.5, 2.5}), 0.0);
    EXPECT_EQ(weyl_measure(s, MultiIndex{{1}}, {0.5, 1.5}), 0.0);
}

TEST(Weyl, MeasureRefinement) {
    ModelSpec m = variable_torus();
    Grid g(m.domain, {256, 256});
    const double coarse = weyl_measure(sample_fields(m, g), MultiIndex{{0}}, {0.9, 1.1});
    const double fine = weyl_measure(sample_fields(m, g.refined(4)), MultiIndex{{0}}, {0.9, 1.1});
    EXPECT_GT(fine, 0.0);
    EXPECT_LE(std::fabs(coarse - fine) / fine, 0.01);
}

TEST(Weyl, CountPrediction) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
    for (int p : {4, 8, 16, 32}) {
        WeylPrediction w = weyl_count_prediction(s, {0.5, 1.5}, p);
        EXPECT_NEAR(w.count, p, 1e-12 * p);
        EXPECT_FALSE(w.boundary_on_level_set);
        EXPECT_EQ(weyl_count_prediction(s, {1.5, 2.5}, p).count, 0.0);
    }
    EXPECT_TRUE(weyl_count_prediction(s, {1.0, 2.0}, 4).boundary_on_level_set);
}

TEST(Weyl, AnnulusUnderGaussianWell) {
    // 3 + V in [2.2, 2.8] for V = -exp(-r^2/2) is an annulus of area 2 pi ln 4.
    ModelSpec m = planar_model(DomainKind::Rectangle, 20.0, -10.0, "1", 1.0, "-exp(-r2/2)");
    FieldSamples s = sample_fields(m, Grid(m.domain, {1000, 1000}));
    for (int p : {8, 32}) {
        WeylPrediction w = weyl_count_prediction(s, {2.2, 2.8}, p);
        EXPECT_NEAR(w.count, p * std::log(4.0), 0.01 * p * std::log(4.0));
    }
}

TEST(Weyl, AdditiveAndMonotone) {
    ModelSpec m = variable_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {128, 128}));
    // Split at an energy no node attains, so the shared endpoint counts once.
    const double whole = weyl_count_prediction(s, {0.8, 1.2}, 16).count;
    const double left = weyl_count_prediction(s, {0.8, 1.0123456789}, 16).count;
    const double right = weyl_count_prediction(s, {1.0123456789, 1.2}, 16).count;
    EXPECT_NEAR(left + right, whole, 1e-12 * whole);
    EXPECT_LE(weyl_count_prediction(s, {0.9, 1.1}, 16).count, whole);
}

TEST(Trace, PairingExamples) {
    ModelSpec m = unit_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
    EXPECT_NEAR(f0_pairing(s, TestFunction({0.5, 1.5})), 1.0, 1e-12);
    EXPECT_EQ(f0_pairing(s, TestFunction({1.5, 2.5})), 0.0);
    for (std::size_t node : {0u, 17u, 1023u}) {
        EXPECT_NEAR(local_f0(s, TestFunction({0.5, 1.5}), node), 1.0 / (2.0 * kPi), 1e-15);
        EXPECT_EQ(local_f0(s, TestFunction({1.5, 2.5}), node), 0.0);
    }
}

TEST(Trace, PairingVariableFieldOracle) {
    ModelSpec m = variable_torus();
    Interval support{0.9, 1.1};
    FieldSamples s = sample_fields(m, Grid(m.domain, {512, 512}));
    const double value = f0_pairing(s, TestFunction(support));

    // Periodic trapezoid rule on a finer lattice, levels k = 0 and 1.
    const int n = 2048;
    const double h = kTorusSide / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double b = variable_b(i * h, j * h);
            sum += b * (bump(b, support.lo, support.hi) + bump(3 * b, support.lo, support.hi));
        }
    const double oracle = sum * h * h / (2.0 * kPi);
    EXPECT_NEAR(value, oracle, 1e-4 * oracle);
}

TEST(Trace, LocalDensityOracle) {
    ModelSpec m = variable_torus();
    Grid g(m.domain, {64, 64});
    FieldSamples s = sample_fields(m, g);
    TestFunction phi({0.6, 3.0});
    for (std::size_t node : {0u, 100u, 2080u, 4095u}) {
        auto x = g.coords(node);
        const double b = variable_b(x[0], x[1]);
        double expect = 0.0;
        for (int k = 0; k < 4; ++k) expect += bump((2 * k + 1) * b, 0.6, 3.0);
        expect *= b / (2.0 * kPi);
        EXPECT_NEAR(local_f0(s, phi, node), expect, 1e-14);
    }
}

TEST(Trace, PairingSumsOverDisjointSupports) {
    ModelSpec m = variable_torus();
    FieldSamples s = sample_fields(m, Grid(m.domain, {128, 128}));
    const double a = f0_pairing(s, TestFunction({0.6, 1.4}));
    const double b = f0_pairing(s, TestFunction({2.0, 4.0}));
    // Node by node the local densities add up to the same totals.
    double la = 0.0, lb = 0.0;
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        la += local_f0(s, TestFunction({0.6, 1.4}), i) * s.grid.weight(i);
        lb += local_f0(s, TestFunction({2.0, 4.0}), i) * s.grid.weight(i);
    }
    EXPECT_NEAR(a + b, la + lb, 1e-12 * (a + b));
}

TEST(Sums, PairwiseIsDeterministic) {
    auto f = [](std::size_t i) { return 1.0 / (1.0 + static_cast<double>(i)); };
    const double a = pairwise_sum(100000, f);
    const double b = pairwise_sum(100000, f);
    EXPECT_EQ(a, b);
    double naive = 0.0;
    for (std::size_t i = 0; i < 100000; ++i) naive += f(i);
    EXPECT_NEAR(a, naive, 1e-10);
    EXPECT_EQ(pairwise_sum(0, f), 0.0);
}
