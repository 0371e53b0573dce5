#include <catch2/catch_amalgamated.hpp>

#include "plapeig/quadrature.hpp"
#include "plapeig/verify.hpp"

#include <cmath>

using namespace plapeig;

namespace {

// exact integral of l1^a l2^b over the reference triangle of area 1/2,
// scaled to a unit-area weight sum: int = a! b! / (a+b+2)! * 2
double bary_monomial_mean(int a, int b) {
    auto fact = [](int k) {
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return f;
    };
    return 2.0 * fact(a) * fact(b) / fact(a + b + 2);
}

} // namespace

TEST_CASE("triangle rule integrates all monomials up to degree 4") {
    const QuadratureRule& rule = triangle_rule_degree4();
    REQUIRE(rule.degree == 4);
    for (int a = 0; a <= 4; ++a) {
        for (int b = 0; a + b <= 4; ++b) {
            double quad = 0.0;
            for (int q = 0; q < 6; ++q) {
                const Bary& pt = rule.points[static_cast<std::size_t>(q)];
                quad += rule.weights[static_cast<std::size_t>(q)] * std::pow(pt[1], a) * std::pow(pt[2], b);
            }
            INFO("a=" << a << " b=" << b);
            REQUIRE(quad == Catch::Approx(bary_monomial_mean(a, b)).margin(1e-15));
        }
    }
}

TEST_CASE("triangle rule weights are positive and sum to one") {
    const QuadratureRule& rule = triangle_rule_degree4();
    double sum = 0.0;
    for (int q = 0; q < 6; ++q) {
        REQUIRE(rule.weights[static_cast<std::size_t>(q)] > 0.0);
        sum += rule.weights[static_cast<std::size_t>(q)];
        for (int i = 0; i < 3; ++i) {
            double l = rule.points[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)];
            REQUIRE(l > 0.0);
            REQUIRE(l < 1.0);
        }
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("triangle rule is not exact at degree 5 but close for smooth integrands") {
    // l1^5: quadrature differs from the exact mean, i.e. the rule does not
    // silently claim a higher degree.
    const QuadratureRule& rule = triangle_rule_degree4();
    double quad = 0.0;
    for (int q = 0; q < 6; ++q)
        quad += rule.weights[static_cast<std::size_t>(q)] * std::pow(rule.points[static_cast<std::size_t>(q)][1], 5);
    REQUIRE(std::abs(quad - bary_monomial_mean(5, 0)) > 1e-6);
}

TEST_CASE("edge rule integrates monomials up to degree 5") {
    const EdgeQuadratureRule& rule = edge_rule_gauss3();
    REQUIRE(rule.degree == 5);
    double sum = 0.0;
    for (int q = 0; q < 3; ++q) sum += rule.weights[static_cast<std::size_t>(q)];
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-15));
    for (int k = 0; k <= 5; ++k) {
        double quad = 0.0;
        for (int q = 0; q < 3; ++q)
            quad += rule.weights[static_cast<std::size_t>(q)] * std::pow(rule.points[static_cast<std::size_t>(q)], k);
        INFO("k=" << k);
        REQUIRE(quad == Catch::Approx(1.0 / (k + 1)).margin(1e-15));
    }
}

TEST_CASE("edge rule nodes are symmetric about the midpoint") {
    const EdgeQuadratureRule& rule = edge_rule_gauss3();
    REQUIRE(rule.points[1] == Catch::Approx(0.5).margin(1e-16));
    REQUIRE(rule.points[0] + rule.points[2] == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(rule.weights[0] == Catch::Approx(rule.weights[2]).margin(1e-16));
}

TEST_CASE("16-point Gauss-Legendre oracle is exact to degree 31") {
    const oracle::GaussLegendre& gl = oracle::gauss_legendre16();
    for (int k : {0, 1, 2, 7, 16, 25, 31}) {
        double quad = 0.0;
        for (int q = 0; q < 16; ++q)
            quad += gl.weight[static_cast<std::size_t>(q)] * std::pow(gl.node[static_cast<std::size_t>(q)], k);
        INFO("k=" << k);
        REQUIRE(quad == Catch::Approx(1.0 / (k + 1)).epsilon(1e-14));
    }
}

TEST_CASE("fractional powers of a positive linear function integrate accurately") {
    // The degree-4 rule is the one norms and estimators run on; pin its
    // error against a Richardson-extrapolated composite reference.
    TriangleMesh ref = TriangleMesh::from_raw({{0, 0}, {1, 0}, {0, 1}}, {Element{{0, 1, 2}, 0}});
    CRFunction v = make_cr_function(ref);
    v.dof = {0.9, 1.1, 1.3};
    for (double p : {2.5, 3.5}) {
        double quad = lp_norm_p(ref, v, p);
        auto f = [&](const Bary& b) { return std::pow(std::abs(eval_on_element(ref, v, 0, b)), p); };
        double c1 = oracle::composite_centroid(ref, 0, 64, f);
        double c2 = oracle::composite_centroid(ref, 0, 128, f);
        double exact = (4.0 * c2 - c1) / 3.0;
        INFO("p=" << p);
        REQUIRE(quad == Catch::Approx(exact).epsilon(1e-4));
    }
}
