#include "landau/errors.hpp"
#include "landau/expr.hpp"
#include "landau/model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace landau;
using namespace testing_support;

namespace {

double eval(const std::string& text, std::vector<double> x = {0.0, 0.0}) {
    SymbolTable s;
    s.constants["a"] = 2.0;
    return Expression::parse(text, s)(x);
}

} // namespace

TEST(Expression, Precedence) {
    EXPECT_DOUBLE_EQ(eval("1 + 2*3"), 7.0);
    EXPECT_DOUBLE_EQ(eval("(1 + 2)*3"), 9.0);
    EXPECT_DOUBLE_EQ(eval("2^3^2"), 512.0);
    EXPECT_DOUBLE_EQ(eval("-2^2"), -4.0);
    EXPECT_DOUBLE_EQ(eval("2^-1"), 0.5);
    EXPECT_DOUBLE_EQ(eval("8/2/2"), 2.0);
    EXPECT_DOUBLE_EQ(eval("1 - 2 - 3"), -4.0);
}

TEST(Expression, NamesAndFunctions) {
    EXPECT_DOUBLE_EQ(eval("x1 + 10*x2", {3.0, 4.0}), 43.0);
    EXPECT_DOUBLE_EQ(eval("x*y", {3.0, 4.0}), 12.0);
    EXPECT_DOUBLE_EQ(eval("r2", {3.0, 4.0}), 25.0);
    EXPECT_DOUBLE_EQ(eval("r", {3.0, 4.0}), 5.0);
    EXPECT_DOUBLE_EQ(eval("a*pi"), 2.0 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(eval("log(e)"), 1.0);
    EXPECT_DOUBLE_EQ(eval("atan2(1, 1)"), std::atan2(1.0, 1.0));
    EXPECT_DOUBLE_EQ(eval("max(min(3, 4), 1)"), 3.0);
    EXPECT_DOUBLE_EQ(eval("pow(2, 10)"), 1024.0);
    EXPECT_DOUBLE_EQ(eval("floor(-1.5) + abs(-2)"), 0.0);
    EXPECT_DOUBLE_EQ(eval("sqrt(16)*cos(0)*exp(0)"), 4.0);
}

TEST(Expression, ConstantDetection) {
    SymbolTable s;
    EXPECT_TRUE(Expression::parse("2*pi + 1", s).is_constant());
    EXPECT_FALSE(Expression::parse("x1", s).is_constant());
    EXPECT_TRUE(Expression::constant(3.0).is_constant());
}

TEST(Expression, Errors) {
    SymbolTable s;
    EXPECT_THROW(Expression::parse("1 +", s), ParseError);
    EXPECT_THROW(Expression::parse("foo", s), ParseError);
    EXPECT_THROW(Expression::parse("sin(1, 2)", s), ParseError);
    EXPECT_THROW(Expression::parse("(1", s), ParseError);
    EXPECT_THROW(Expression::parse("x3", s), ParseError);
    EXPECT_THROW(Expression::parse("1 2", s), ParseError);
    try {
        Expression::parse("1 + * 2", s);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 4u);
    }
}

TEST(Validate, ConstantFieldPasses) {
    ModelSpec m = unit_torus();
    ValidationReport r = validate_model(m, Grid(m.domain, {32, 32}));
    EXPECT_TRUE(r.passed);
    EXPECT_DOUBLE_EQ(r.min_frame_eigenvalue, 1.0);
    EXPECT_EQ(r.nodes_checked, 1024u);
}

TEST(Validate, VanishingFieldFails) {
    ModelSpec m = planar_model(DomainKind::Torus, 2.0 * std::numbers::pi, 0.0, "sin(x1)", 0.1);
    EXPECT_THROW(validate_model(m, Grid(m.domain, {32, 32})), NonDegeneracyViolation);
}

TEST(Validate, VariableFieldMinimum) {
    ModelSpec m = variable_torus();
    // Oracle: the minimum of b on a grid that contains (0, L/2), where
    // cos * cos = -1.
    double oracle = 1e300;
    for (int i = 0; i < 256; ++i)
        for (int j = 0; j < 256; ++j)
            oracle = std::min(oracle, 1.0 + 0.3 * std::cos(2 * std::numbers::pi * i / 256.0) *
                                                std::cos(2 * std::numbers::pi * j / 256.0));
    ValidationReport r = validate_model(m, Grid(m.domain, {256, 256}));
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.min_frame_eigenvalue, oracle, 1e-14);
    EXPECT_NEAR(r.min_frame_eigenvalue, 0.7, 1e-14);
    EXPECT_NEAR(r.max_frame_eigenvalue, 1.3, 1e-14);

    m.b0 = 0.71;
    EXPECT_THROW(validate_model(m, Grid(m.domain, {256, 256})), NonDegeneracyViolation);
}

TEST(Validate, MetricMustBePositive) {
    ModelSpec m = unit_torus();
    m.metric = {Expression::constant(1.0), Expression::constant(2.0), Expression::constant(1.0)};
    EXPECT_THROW(validate_model(m, Grid(m.domain, {8, 8})), MetricNotSPD);
}

TEST(Sample, ConstantField) {
    ModelSpec m = planar_model(DomainKind::Torus, 3.0, 0.0, "2", 2.0);
    FieldSamples s = sample_fields(m, Grid(m.domain, {32, 32}));
    ASSERT_EQ(s.node_count(), 1024u);
    for (std::size_t i = 0; i < s.node_count(); ++i) EXPECT_DOUBLE_EQ(s.frame_at(i)[0], 2.0);
}

TEST(Sample, MetricScalesFrame) {
    ModelSpec m = unit_torus();
    m.two_form_is_density = false;
    m.two_form = {Expression::constant(3.0)};
    m.metric = {Expression::constant(2.0), Expression::constant(0.0), Expression::constant(2.0)};
    FieldSamples s = sample_fields(m, Grid(m.domain, {8, 8}));
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        EXPECT_NEAR(s.frame_at(i)[0], 1.5, 1e-14);
        EXPECT_NEAR(s.sqrt_det_g[i], 2.0, 1e-14);
    }
}

TEST(Sample, GaussianPotential) {
    ModelSpec m = planar_model(DomainKind::Rectangle, 20.0, -10.0, "1", 1.0, "-exp(-r2/2)");
    Grid g(m.domain, {40, 40});
    FieldSamples s = sample_fields(m, g);
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        auto x = g.coords(i);
        EXPECT_DOUBLE_EQ(s.potential[i], -std::exp(-(x[0] * x[0] + x[1] * x[1]) / 2.0));
    }
}

TEST(Sample, NonFiniteFieldIsReported) {
    ModelSpec m = planar_model(DomainKind::Torus, 2.0, 0.0, "1", 1.0, "log(x1)");
    EXPECT_THROW(sample_fields(m, Grid(m.domain, {4, 4})), FieldEvaluationError);
}

TEST(Sample, Deterministic) {
    ModelSpec m = variable_torus();
    Grid g(m.domain, {64, 64});
    FieldSamples a = sample_fields(m, g);
    FieldSamples b = sample_fields(m, g);
    EXPECT_EQ(a.frame, b.frame);
    EXPECT_EQ(a.potential, b.potential);
}

TEST(Grid, RefinementSharesNodes) {
    ModelSpec m = variable_torus();
    Grid g(m.domain, {16, 16});
    Grid f = g.refined();
    ASSERT_EQ(f.cells(), (std::vector<int>{32, 32}));
    FieldSamples cs = sample_fields(m, g), fs = sample_fields(m, f);
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        auto idx = g.multi_index(node);
        std::vector<int> fine{2 * idx[0], 2 * idx[1]};
        auto fnode = f.flat_index(fine);
        EXPECT_EQ(g.coords(node), f.coords(fnode));
        EXPECT_EQ(cs.frame[node], fs.frame[fnode]);
    }
}

TEST(Grid, RectangleWeightsIntegrateArea) {
    Domain d{DomainKind::Rectangle, {3.0, 2.0}, {-1.0, 0.5}};
    Grid g(d, {6, 5});
    EXPECT_EQ(g.node_count(), 7u * 6u);
    double area = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) area += g.weight(i);
    EXPECT_NEAR(area, 6.0, 1e-14);
}

TEST(Grid, ResolutionGate) {
    ModelSpec m = unit_torus();
    Grid g(m.domain, {32, 32});
    const double h = kTorusSide / 32.0;
    EXPECT_NEAR(g.resolution_ratio(4.0, 1.0), h * 2.0, 1e-15);
    EXPECT_NO_THROW(g.require_resolution(2.0, 1.0));
    EXPECT_THROW(g.require_resolution(4.0, 1.0), ResolutionTooCoarse);

    auto cells = cells_for_resolution(m.domain, 32.0, 1.3, 8.0, 2);
    Grid ok(m.domain, cells);
    EXPECT_LE(ok.resolution_ratio(32.0, 1.3), 0.125);
    EXPECT_EQ(cells[0] % 2, 0);
    Grid smaller(m.domain, {cells[0] - 2, cells[1] - 2});
    EXPECT_GT(smaller.resolution_ratio(32.0, 1.3), 0.125);
}
