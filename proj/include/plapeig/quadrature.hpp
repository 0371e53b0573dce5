#pragma once

#include <array>
#include <cmath>

#include "plapeig/common.hpp"

namespace plapeig {

// Symmetric triangle rule in barycentric coordinates. Weights sum to 1, so
// integrals are weight-averaged values times the element area.
struct QuadratureRule {
    std::array<Bary, 6> points;
    std::array<double, 6> weights;
    int degree = 0;
};

// Two three-point orbits, exact through polynomial degree 4.
inline const QuadratureRule& triangle_rule_degree4() {
    static const QuadratureRule rule = [] {
        const double a1 = 0.4459484909159649;
        const double w1 = 0.2233815896780115;
        const double a2 = 0.0915762135097707;
        const double w2 = 0.1099517436553219;
        QuadratureRule r;
        r.degree = 4;
        auto orbit = [](double a) {
            double b = 1.0 - 2.0 * a;
            return std::array<Bary, 3>{Bary{a, a, b}, Bary{a, b, a}, Bary{b, a, a}};
        };
        auto o1 = orbit(a1);
        auto o2 = orbit(a2);
        for (int i = 0; i < 3; ++i) {
            r.points[static_cast<std::size_t>(i)] = o1[static_cast<std::size_t>(i)];
            r.weights[static_cast<std::size_t>(i)] = w1;
            r.points[static_cast<std::size_t>(3 + i)] = o2[static_cast<std::size_t>(i)];
            r.weights[static_cast<std::size_t>(3 + i)] = w2;
        }
        return r;
    }();
    return rule;
}

// Gauss rule on the unit interval (points in (0,1), weights sum to 1),
// exact through degree 5. Used for edge integrals and edge dof means.
struct EdgeQuadratureRule {
    std::array<double, 3> points;
    std::array<double, 3> weights;
    int degree = 0;
};

inline const EdgeQuadratureRule& edge_rule_gauss3() {
    static const EdgeQuadratureRule rule = [] {
        EdgeQuadratureRule r;
        const double s = 0.5 * std::sqrt(3.0 / 5.0);
        r.points = {0.5 - s, 0.5, 0.5 + s};
        r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
        r.degree = 5;
        return r;
    }();
    return rule;
}

} // namespace plapeig
