#pragma once

#include <functional>
#include <ostream>

#include "plapeig/mesh.hpp"
#include "plapeig/quadrature.hpp"

namespace plapeig {

// Crouzeix-Raviart function: one dof per edge, the value at the edge
// midpoint. On an element, v = sum_i dof(edge_i) * (1 - 2*lambda_i).
// generation ties the dof vector to one mesh; using it with another
// refinement level is an error, not a silent reinterpretation.
struct CRFunction {
    int generation = 0;
    std::vector<double> dof;
};

inline CRFunction make_cr_function(const TriangleMesh& mesh) {
    return CRFunction{mesh.generation(), std::vector<double>(static_cast<std::size_t>(mesh.num_edges()), 0.0)};
}

inline void check_bound(const TriangleMesh& mesh, const CRFunction& v) {
    if (v.generation != mesh.generation() || static_cast<int>(v.dof.size()) != mesh.num_edges())
        throw StaleFunctionError("CRFunction does not belong to this mesh generation");
}

// Piecewise-linear conforming function with vertex dofs.
struct ConformingP1Function {
    int generation = 0;
    std::vector<double> dof;
};

// Basis values 1 - 2*lambda_i at the triangle quadrature points.
inline const std::array<std::array<double, 3>, 6>& cr_basis_at_quadrature() {
    static const std::array<std::array<double, 3>, 6> vals = [] {
        std::array<std::array<double, 3>, 6> v{};
        const QuadratureRule& rule = triangle_rule_degree4();
        for (int q = 0; q < 6; ++q)
            for (int i = 0; i < 3; ++i)
                v[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] =
                    1.0 - 2.0 * rule.points[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)];
        return v;
    }();
    return vals;
}

inline double eval_on_element(const TriangleMesh& mesh, const CRFunction& v, int t, const Bary& b) {
    check_bound(mesh, v);
    const auto& ee = mesh.element_edges(t);
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        s += v.dof[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])] * (1.0 - 2.0 * b[static_cast<std::size_t>(i)]);
    return s;
}

// Values of v|_T at the three element vertices; an affine function attains
// its extrema there.
inline std::array<double, 3> cr_vertex_values(const TriangleMesh& mesh, const CRFunction& v, int t) {
    const auto& ee = mesh.element_edges(t);
    double d0 = v.dof[static_cast<std::size_t>(ee[0])];
    double d1 = v.dof[static_cast<std::size_t>(ee[1])];
    double d2 = v.dof[static_cast<std::size_t>(ee[2])];
    double s = d0 + d1 + d2;
    return {s - 2.0 * d0, s - 2.0 * d1, s - 2.0 * d2};
}

// Precomputed per-element geometry: area and the gradients of the three CR
// basis functions. grad phi_i = -2 * grad lambda_i.
struct CrGeometry {
    explicit CrGeometry(const TriangleMesh& mesh) {
        const int ne = mesh.num_elements();
        area.resize(static_cast<std::size_t>(ne));
        grad.resize(static_cast<std::size_t>(ne));
        for (int t = 0; t < ne; ++t) {
            double a = mesh.element_area(t);
            area[static_cast<std::size_t>(t)] = a;
            for (int i = 0; i < 3; ++i) {
                Vec2 e = mesh.element_vertex(t, (i + 2) % 3) - mesh.element_vertex(t, (i + 1) % 3);
                Vec2 grad_lambda{-e.y / (2.0 * a), e.x / (2.0 * a)};
                grad[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = -2.0 * grad_lambda;
            }
        }
    }
    std::vector<double> area;
    std::vector<std::array<Vec2, 3>> grad;
};

inline Vec2 broken_gradient(const TriangleMesh& mesh, const CRFunction& v, int t) {
    check_bound(mesh, v);
    const auto& ee = mesh.element_edges(t);
    double a = mesh.element_area(t);
    Vec2 g{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        Vec2 e = mesh.element_vertex(t, (i + 2) % 3) - mesh.element_vertex(t, (i + 1) % 3);
        Vec2 grad_phi{2.0 * e.y / (2.0 * a), -2.0 * e.x / (2.0 * a)};
        g += v.dof[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])] * grad_phi;
    }
    return g;
}

// int_T |v|^p by the degree-4 rule.
inline double element_lp_norm_p(const TriangleMesh& mesh, const CRFunction& v, double p, int t) {
    const QuadratureRule& rule = triangle_rule_degree4();
    const auto& phi = cr_basis_at_quadrature();
    const auto& ee = mesh.element_edges(t);
    double d0 = v.dof[static_cast<std::size_t>(ee[0])];
    double d1 = v.dof[static_cast<std::size_t>(ee[1])];
    double d2 = v.dof[static_cast<std::size_t>(ee[2])];
    double s = 0.0;
    for (int q = 0; q < 6; ++q) {
        const auto& ph = phi[static_cast<std::size_t>(q)];
        double val = d0 * ph[0] + d1 * ph[1] + d2 * ph[2];
        s += rule.weights[static_cast<std::size_t>(q)] * std::pow(std::abs(val), p);
    }
    return mesh.element_area(t) * s;
}

// sum_T int_T |v|^p over the whole mesh.
inline double lp_norm_p(const TriangleMesh& mesh, const CRFunction& v, double p) {
    check_bound(mesh, v);
    double s = 0.0;
    for (int t = 0; t < mesh.num_elements(); ++t) s += element_lp_norm_p(mesh, v, p, t);
    return s;
}

// ... and over an element subset.
inline double lp_norm_p(const TriangleMesh& mesh, const CRFunction& v, double p,
                        const std::vector<int>& elems) {
    check_bound(mesh, v);
    double s = 0.0;
    for (int t : elems) {
        if (t < 0 || t >= mesh.num_elements()) throw std::invalid_argument("lp_norm_p: element out of range");
        s += element_lp_norm_p(mesh, v, p, t);
    }
    return s;
}

// Broken W^{1,p} seminorm to the p-th power: sum_T |T| |grad v|_T|^p.
inline double broken_seminorm_p(const TriangleMesh& mesh, const CRFunction& v, double p) {
    check_bound(mesh, v);
    double s = 0.0;
    for (int t = 0; t < mesh.num_elements(); ++t) {
        Vec2 g = broken_gradient(mesh, v, t);
        s += mesh.element_area(t) * std::pow(norm(g), p);
    }
    return s;
}

inline double linf_norm(const TriangleMesh& mesh, const CRFunction& v) {
    check_bound(mesh, v);
    double m = 0.0;
    for (int t = 0; t < mesh.num_elements(); ++t) {
        auto vv = cr_vertex_values(mesh, v, t);
        for (double x : vv) m = std::max(m, std::abs(x));
    }
    return m;
}

// int_F |[v]|^p. The jump across an interior face (or the trace on a
// boundary face) is linear along the face, so the integral has a closed
// form from the endpoint values:
//   int_0^h |j(s)|^p ds = h * (sp(jB) - sp(jA)) / ((jB - jA)(p+1)),
// with sp(t) = sign(t)|t|^{p+1}; constant jumps reduce to h|jA|^p. For CR
// functions the jump vanishes at the midpoint (jB = -jA) and this collapses
// to |jA|^p h / (p+1).
inline double jump_lp_norm_p(const TriangleMesh& mesh, const CRFunction& v, int face, double p) {
    check_bound(mesh, v);
    if (face < 0 || face >= mesh.num_edges()) throw std::invalid_argument("jump_lp_norm_p: face out of range");
    const Edge& e = mesh.edges()[static_cast<std::size_t>(face)];

    auto value_at_vertex = [&](int t, int gv) {
        const Element& el = mesh.elements()[static_cast<std::size_t>(t)];
        auto vv = cr_vertex_values(mesh, v, t);
        for (int i = 0; i < 3; ++i)
            if (el.v[static_cast<std::size_t>(i)] == gv) return vv[static_cast<std::size_t>(i)];
        throw std::logic_error("jump_lp_norm_p: vertex not in element");
    };

    double ja = value_at_vertex(e.elem[0], e.a);
    double jb = value_at_vertex(e.elem[0], e.b);
    if (!e.boundary) {
        ja -= value_at_vertex(e.elem[1], e.a);
        jb -= value_at_vertex(e.elem[1], e.b);
    }
    double h = face_size(mesh, face);
    if (ja == jb) return h * std::pow(std::abs(ja), p);
    return h * (signed_pow(jb, p + 1.0) - signed_pow(ja, p + 1.0)) / ((jb - ja) * (p + 1.0));
}

// CR interpolation: dof on edge F is the mean (1/|F|) int_F f ds, computed
// with the 3-point Gauss rule. With zero_boundary the boundary dofs are
// forced to 0 (Dirichlet space); disable it for synthetic test functions.
inline CRFunction interpolate_cr(const TriangleMesh& mesh, const std::function<double(Vec2)>& f,
                                 bool zero_boundary = true) {
    CRFunction v = make_cr_function(mesh);
    const EdgeQuadratureRule& rule = edge_rule_gauss3();
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Edge& ed = mesh.edges()[static_cast<std::size_t>(e)];
        if (zero_boundary && ed.boundary) continue;
        Vec2 a = mesh.vertices()[static_cast<std::size_t>(ed.a)];
        Vec2 b = mesh.vertices()[static_cast<std::size_t>(ed.b)];
        double s = 0.0;
        for (int q = 0; q < 3; ++q)
            s += rule.weights[static_cast<std::size_t>(q)] * f(a + rule.points[static_cast<std::size_t>(q)] * (b - a));
        v.dof[static_cast<std::size_t>(e)] = s;
    }
    return v;
}

// Connection (enrichment) operator: conforming P1 function whose value at an
// interior vertex is the average of the CR values of the incident elements;
// boundary vertices are set to 0.
inline ConformingP1Function connect_to_conforming(const TriangleMesh& mesh, const CRFunction& v) {
    check_bound(mesh, v);
    const int nv = mesh.num_vertices();
    std::vector<double> sum(static_cast<std::size_t>(nv), 0.0);
    std::vector<int> count(static_cast<std::size_t>(nv), 0);
    for (int t = 0; t < mesh.num_elements(); ++t) {
        const Element& el = mesh.elements()[static_cast<std::size_t>(t)];
        auto vv = cr_vertex_values(mesh, v, t);
        for (int i = 0; i < 3; ++i) {
            sum[static_cast<std::size_t>(el.v[static_cast<std::size_t>(i)])] += vv[static_cast<std::size_t>(i)];
            count[static_cast<std::size_t>(el.v[static_cast<std::size_t>(i)])] += 1;
        }
    }
    ConformingP1Function w;
    w.generation = mesh.generation();
    w.dof.resize(static_cast<std::size_t>(nv), 0.0);
    for (int z = 0; z < nv; ++z) {
        if (mesh.vertex_on_boundary(z) || count[static_cast<std::size_t>(z)] == 0) continue;
        w.dof[static_cast<std::size_t>(z)] = sum[static_cast<std::size_t>(z)] / count[static_cast<std::size_t>(z)];
    }
    return w;
}

inline void check_bound(const TriangleMesh& mesh, const ConformingP1Function& v) {
    if (v.generation != mesh.generation() || static_cast<int>(v.dof.size()) != mesh.num_vertices())
        throw StaleFunctionError("ConformingP1Function does not belong to this mesh generation");
}

inline double eval_p1(const TriangleMesh& mesh, const ConformingP1Function& v, int t, const Bary& b) {
    check_bound(mesh, v);
    const Element& el = mesh.elements()[static_cast<std::size_t>(t)];
    return b[0] * v.dof[static_cast<std::size_t>(el.v[0])] + b[1] * v.dof[static_cast<std::size_t>(el.v[1])] +
           b[2] * v.dof[static_cast<std::size_t>(el.v[2])];
}

// CSV: edge_id,mx,my,dof with 9 significant digits.
inline void write_solution_csv(const TriangleMesh& mesh, const CRFunction& v, std::ostream& os) {
    check_bound(mesh, v);
    os << "edge_id,mx,my,dof\n";
    os.precision(9);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        Vec2 m = mesh.edge_midpoint(e);
        os << e << ',' << m.x << ',' << m.y << ',' << v.dof[static_cast<std::size_t>(e)] << '\n';
    }
}

} // namespace plapeig
