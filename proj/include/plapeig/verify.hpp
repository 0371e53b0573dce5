#pragma once

#include <numbers>
#include <sstream>

#include "plapeig/adapt.hpp"

namespace plapeig {

// Self-contained reference computations the shipped checks compare against.
// They deliberately avoid the code paths they check: Gauss-Legendre nodes
// come from a Newton iteration on the Legendre recurrence, triangle
// integrals from a composite centroid rule, the scalar resolvent root from
// plain bisection, and the p=2 eigenvalue from inverse power iteration on
// the assembled matrices.
namespace oracle {

struct GaussLegendre {
    std::array<double, 16> node; // on [0,1]
    std::array<double, 16> weight;
};

inline const GaussLegendre& gauss_legendre16() {
    static const GaussLegendre gl = [] {
        GaussLegendre g{};
        const int n = 16;
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            g.node[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x); // descending roots -> ascending nodes
            g.weight[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * pp * pp);
        }
        return g;
    }();
    return gl;
}

// Composite centroid rule over a k x k self-similar subdivision of an
// element; integrand given in barycentric coordinates.
inline double composite_centroid(const TriangleMesh& mesh, int t, int k,
                                 const std::function<double(const Bary&)>& f) {
    double area = mesh.element_area(t) / (k * k);
    double s = 0.0;
    auto bary_of = [k](double i, double j) {
        double l1 = i / k, l2 = j / k;
        return Bary{1.0 - l1 - l2, l1, l2};
    };
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k - i; ++j) {
            Bary up = bary_of(i + 1.0 / 3.0, j + 1.0 / 3.0);
            s += f(up);
            if (j < k - i - 1) {
                Bary down = bary_of(i + 2.0 / 3.0, j + 2.0 / 3.0);
                s += f(down);
            }
        }
    }
    return area * s;
}

// int_F |[v]|^p by Gauss quadrature, evaluating the jump through the element
// evaluation path. |j|^p has a kink where the linear jump crosses zero (the
// midpoint for interior CR faces, anywhere for boundary traces), so the edge
// is split there and each piece uses the substitution s = sigma^4, which
// makes the integrand smooth; 16 points are then ample for the p used here.
inline double jump_lp_gauss(const TriangleMesh& mesh, const CRFunction& v, int face, double p) {
    const Edge& e = mesh.edges()[static_cast<std::size_t>(face)];
    Vec2 a = mesh.vertices()[static_cast<std::size_t>(e.a)];
    Vec2 b = mesh.vertices()[static_cast<std::size_t>(e.b)];
    auto jump_at = [&](double t) {
        Vec2 x = a + t * (b - a);
        double j = eval_on_element(mesh, v, e.elem[0], mesh.barycentric(e.elem[0], x));
        if (!e.boundary) j -= eval_on_element(mesh, v, e.elem[1], mesh.barycentric(e.elem[1], x));
        return j;
    };
    double ja = jump_at(0.0), jb = jump_at(1.0);
    double anchor = 0.5;
    if (ja != jb) anchor = std::clamp(ja / (ja - jb), 0.0, 1.0);
    const GaussLegendre& gl = gauss_legendre16();
    double total = 0.0;
    for (double tend : {0.0, 1.0}) {
        double span = tend - anchor;
        if (span == 0.0) continue;
        double s = 0.0;
        for (int q = 0; q < 16; ++q) {
            double sigma = gl.node[static_cast<std::size_t>(q)];
            double w = gl.weight[static_cast<std::size_t>(q)];
            double t = anchor + (sigma * sigma * sigma * sigma) * span;
            s += w * 4.0 * sigma * sigma * sigma * std::pow(std::abs(jump_at(t)), p);
        }
        total += std::abs(span) * s;
    }
    return total * norm(b - a);
}

inline double resolvent_root_bisection(double r, double p) {
    if (r == 0.0) return 0.0;
    double lo = 0.0, hi = std::max(r, 1.0);
    for (int it = 0; it < 200; ++it) {
        double s = 0.5 * (lo + hi);
        (std::pow(s, p - 1.0) + s < r ? lo : hi) = s;
    }
    return 0.5 * (lo + hi);
}

// Smallest eigenvalue of A x = lambda M x (p = 2 CR matrices, M diagonal)
// by inverse power iteration.
inline double p2_smallest_eigenvalue(const TriangleMesh& mesh) {
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    std::vector<double> Mdiag(static_cast<std::size_t>(dofs.n_free), 0.0);
    for (int t = 0; t < mesh.num_elements(); ++t) {
        const auto& ee = mesh.element_edges(t);
        for (int i = 0; i < 3; ++i) {
            int fi = dofs.free_of_edge[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])];
            if (fi >= 0) Mdiag[static_cast<std::size_t>(fi)] += mesh.element_area(t) / 3.0;
        }
    }
    const int n = dofs.n_free;
    std::vector<double> x(static_cast<std::size_t>(n), 1.0), b(static_cast<std::size_t>(n));
    LinearSolveConfig lin;
    lin.rel_tol = 1e-12;
    double lambda = 0.0, lambda_prev = 0.0;
    for (int it = 0; it < 400; ++it) {
        for (int i = 0; i < n; ++i)
            b[static_cast<std::size_t>(i)] = Mdiag[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        x = solve_spd(A, b, lin, &x);
        double mnorm = 0.0;
        for (int i = 0; i < n; ++i)
            mnorm += Mdiag[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        mnorm = std::sqrt(mnorm);
        for (double& xi : x) xi /= mnorm;
        std::vector<double> Ax(static_cast<std::size_t>(n));
        A.multiply(x, Ax);
        double num = 0.0;
        for (int i = 0; i < n; ++i) num += x[static_cast<std::size_t>(i)] * Ax[static_cast<std::size_t>(i)];
        lambda = num; // x is M-normalized
        if (it > 0 && std::abs(lambda - lambda_prev) <= 1e-13 * std::abs(lambda_prev)) break;
        lambda_prev = lambda;
    }
    return lambda;
}

} // namespace oracle

struct VerifyOptions {
    // Test hook: scales the closed-form jump value so the sensitivity of the
    // jump check itself can be exercised.
    double jump_closed_form_perturbation = 0.0;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline CheckResult run_check(const std::string& name, const std::function<std::string()>& body) {
    CheckResult r;
    r.name = name;
    try {
        r.detail = body(); // empty string = pass, otherwise failure reason
        r.pass = r.detail.empty();
        if (r.pass) r.detail = "ok";
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    return r;
}

inline std::string fail_msg(const std::string& what, double got, double limit) {
    std::ostringstream os;
    os.precision(6);
    os << what << " = " << got << " exceeds " << limit;
    return os.str();
}

} // namespace detail

inline std::vector<CheckResult> run_verification_suite(const VerifyOptions& opts = {}) {
    using detail::fail_msg;
    using detail::run_check;
    std::vector<CheckResult> out;

    out.push_back(run_check("triangle_quadrature_degree4_exactness", [] {
        // reference triangle: int x^a y^b = a! b! / (a+b+2)!
        TriangleMesh ref = TriangleMesh::from_raw({{0, 0}, {1, 0}, {0, 1}}, {Element{{0, 1, 2}, 0}});
        const QuadratureRule& rule = triangle_rule_degree4();
        auto factorial = [](int k) { double f = 1; for (int i = 2; i <= k; ++i) f *= i; return f; };
        double worst = 0.0;
        for (int a = 0; a + 0 <= 4; ++a) {
            for (int b = 0; a + b <= 4; ++b) {
                double quad = 0.0;
                for (int q = 0; q < 6; ++q) {
                    Vec2 x = ref.point_from_bary(0, rule.points[static_cast<std::size_t>(q)]);
                    quad += rule.weights[static_cast<std::size_t>(q)] * std::pow(x.x, a) * std::pow(x.y, b);
                }
                quad *= ref.element_area(0);
                double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                worst = std::max(worst, std::abs(quad - exact) / exact);
            }
        }
        return worst <= 1e-13 ? std::string() : fail_msg("monomial error", worst, 1e-13);
    }));

    out.push_back(run_check("triangle_quadrature_fractional_power", [] {
        TriangleMesh ref = TriangleMesh::from_raw({{0, 0}, {1, 0}, {0, 1}}, {Element{{0, 1, 2}, 0}});
        CRFunction v = make_cr_function(ref);
        v.dof = {1.0, 1.2, 1.4}; // positive on the element
        const double p = 3.5;
        double quad = lp_norm_p(ref, v, p);
        auto f = [&](const Bary& b) {
            return std::pow(std::abs(eval_on_element(ref, v, 0, b)), p);
        };
        // Richardson-extrapolated centroid composite (error h^2 -> h^4),
        // accurate to ~1e-8 here; the degree-4 rule itself is what is being
        // measured and lands near 2e-5 on this analytic integrand.
        double c1 = oracle::composite_centroid(ref, 0, 64, f);
        double c2 = oracle::composite_centroid(ref, 0, 128, f);
        double refval = (4.0 * c2 - c1) / 3.0;
        double rel = std::abs(quad - refval) / refval;
        return rel <= 1e-4 ? std::string() : fail_msg("relative difference", rel, 1e-4);
    }));

    out.push_back(run_check("edge_quadrature_degree5_exactness", [] {
        const EdgeQuadratureRule& rule = edge_rule_gauss3();
        double worst = 0.0;
        for (int k = 0; k <= 5; ++k) {
            double quad = 0.0;
            for (int q = 0; q < 3; ++q)
                quad += rule.weights[static_cast<std::size_t>(q)] * std::pow(rule.points[static_cast<std::size_t>(q)], k);
            worst = std::max(worst, std::abs(quad - 1.0 / (k + 1)) * (k + 1));
        }
        return worst <= 1e-14 ? std::string() : fail_msg("monomial error", worst, 1e-14);
    }));

    out.push_back(run_check("jump_closed_form_vs_gauss", [&opts] {
        TriangleMesh mesh = make_unit_square_mesh(4);
        CRFunction v = make_cr_function(mesh);
        std::mt19937_64 rng(12345);
        for (double& d : v.dof) d = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
        double worst = 0.0;
        for (double p : {1.2, 2.0, 3.7}) {
            for (int e = 0; e < mesh.num_edges(); ++e) {
                double closed = jump_lp_norm_p(mesh, v, e, p) * (1.0 + opts.jump_closed_form_perturbation);
                double gauss = oracle::jump_lp_gauss(mesh, v, e, p);
                double scale = std::max({closed, gauss, 1e-30});
                worst = std::max(worst, std::abs(closed - gauss) / scale);
            }
        }
        return worst <= 1e-12 ? std::string() : fail_msg("relative difference", worst, 1e-12);
    }));

    out.push_back(run_check("resolvent_vs_bisection", [] {
        double worst = 0.0;
        for (double p : {1.2, 1.5, 2.0, 3.0, 10.0, 30.0}) {
            for (double r : {0.0, 1e-8, 0.5, 1.0, 1.75, 10.0, 1e4}) {
                Vec2 w{r * 0.6, r * 0.8};
                Vec2 nu = resolvent_vector(w, p);
                double s = norm(nu);
                double s_ref = oracle::resolvent_root_bisection(r, p);
                worst = std::max(worst, std::abs(s - s_ref) / (1.0 + r));
                if (r > 0.0) {
                    double resid = std::abs(std::pow(s, p - 1.0) + s - r);
                    worst = std::max(worst, resid / (1.0 + r));
                }
            }
        }
        // p = 2 identity: nu = w/2 exactly up to the scalar tolerance
        Vec2 nu2 = resolvent_vector({3.0, 4.0}, 2.0);
        worst = std::max(worst, norm(nu2 - Vec2{1.5, 2.0}) / 5.0);
        return worst <= 1e-12 ? std::string() : fail_msg("deviation", worst, 1e-12);
    }));

    out.push_back(run_check("interpolation_edge_means", [] {
        TriangleMesh mesh = make_unit_square_mesh(8);
        auto f = [](Vec2 x) { return std::sin(std::numbers::pi * x.x) * std::sin(std::numbers::pi * x.y); };
        CRFunction v = interpolate_cr(mesh, f, /*zero_boundary=*/false);
        const oracle::GaussLegendre& gl = oracle::gauss_legendre16();
        double worst = 0.0;
        for (int e = 0; e < mesh.num_edges(); ++e) {
            const Edge& ed = mesh.edges()[static_cast<std::size_t>(e)];
            Vec2 a = mesh.vertices()[static_cast<std::size_t>(ed.a)];
            Vec2 b = mesh.vertices()[static_cast<std::size_t>(ed.b)];
            double len = norm(b - a);
            double exact = 0.0;
            for (int q = 0; q < 16; ++q)
                exact += gl.weight[static_cast<std::size_t>(q)] * f(a + gl.node[static_cast<std::size_t>(q)] * (b - a));
            exact *= len;
            worst = std::max(worst, std::abs(len * v.dof[static_cast<std::size_t>(e)] - exact));
        }
        // Residual is the 3-point rule's own error on sin*sin at h = 1/8.
        if (worst > 5e-8) return fail_msg("edge mean error", worst, 5e-8);
        // Interpolating the coordinate function reproduces its gradient.
        CRFunction ident = interpolate_cr(mesh, [](Vec2 x) { return x.x; }, false);
        for (int t = 0; t < mesh.num_elements(); ++t) {
            Vec2 g = broken_gradient(mesh, ident, t);
            if (std::abs(g.x - 1.0) > 1e-12 || std::abs(g.y) > 1e-12)
                return std::string("gradient of interpolated coordinate is not (1,0)");
        }
        return std::string();
    }));

    out.push_back(run_check("connection_reproduces_vertex_continuous", [] {
        TriangleMesh mesh = make_unit_square_mesh(6);
        std::mt19937_64 rng(99);
        ConformingP1Function w;
        w.generation = mesh.generation();
        w.dof.assign(static_cast<std::size_t>(mesh.num_vertices()), 0.0);
        for (int z = 0; z < mesh.num_vertices(); ++z)
            if (!mesh.vertex_on_boundary(z))
                w.dof[static_cast<std::size_t>(z)] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        CRFunction v = make_cr_function(mesh);
        for (int e = 0; e < mesh.num_edges(); ++e) {
            const Edge& ed = mesh.edges()[static_cast<std::size_t>(e)];
            v.dof[static_cast<std::size_t>(e)] =
                0.5 * (w.dof[static_cast<std::size_t>(ed.a)] + w.dof[static_cast<std::size_t>(ed.b)]);
        }
        ConformingP1Function back = connect_to_conforming(mesh, v);
        double worst = 0.0;
        for (int z = 0; z < mesh.num_vertices(); ++z)
            worst = std::max(worst, std::abs(back.dof[static_cast<std::size_t>(z)] - w.dof[static_cast<std::size_t>(z)]));
        return worst <= 1e-13 ? std::string() : fail_msg("vertex error", worst, 1e-13);
    }));

    out.push_back(run_check("p2_iiss_vs_power_iteration", [] {
        TriangleMesh mesh = make_unit_square_mesh(8);
        IISSConfig cfg;
        cfg.dc.seed = 7;
        DiscreteEigenpair pair = iiss(mesh, 2.0, cfg);
        double ref = oracle::p2_smallest_eigenvalue(mesh);
        double rel = std::abs(pair.mu - ref) / ref;
        return rel <= 1e-5 ? std::string() : fail_msg("relative deviation", rel, 1e-5);
    }));

    out.push_back(run_check("dorfler_argmax_membership", [] {
        AdaptiveConfig cfg;
        cfg.domain = Domain::Square;
        cfg.initial_resolution = 4;
        cfg.max_loops = 3;
        cfg.eps_k = 1e-12; // run all levels
        cfg.seed = 5;
        std::string problem;
        adaptive_loop(cfg, [&](const LevelInfo& info) {
            auto argmax = [](const std::vector<double>& v) {
                return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
            };
            auto contains = [](const std::vector<int>& set, int x) {
                return std::binary_search(set.begin(), set.end(), x);
            };
            if (!contains(info.marked1, argmax(info.report.eta1)) ||
                !contains(info.marked2, argmax(info.report.eta2)) ||
                !contains(info.marked, argmax(info.report.eta1)))
                problem = "marked set misses the largest indicator at level " + std::to_string(info.record.k);
        });
        return problem;
    }));

    out.push_back(run_check("nvb_similarity_classes_and_area", [] {
        TriangleMesh mesh = make_unit_square_mesh(2);
        const int initial = mesh.num_elements();
        std::vector<std::array<long long, 3>> classes;
        auto collect = [&classes](const TriangleMesh& m) {
            for (int t = 0; t < m.num_elements(); ++t) {
                std::array<double, 3> ang{};
                for (int i = 0; i < 3; ++i) {
                    Vec2 u = m.element_vertex(t, (i + 1) % 3) - m.element_vertex(t, i);
                    Vec2 v = m.element_vertex(t, (i + 2) % 3) - m.element_vertex(t, i);
                    ang[static_cast<std::size_t>(i)] = std::acos(dot(u, v) / (norm(u) * norm(v)));
                }
                std::sort(ang.begin(), ang.end());
                std::array<long long, 3> key{};
                for (int i = 0; i < 3; ++i)
                    key[static_cast<std::size_t>(i)] = std::llround(ang[static_cast<std::size_t>(i)] * 1e9);
                classes.push_back(key);
            }
        };
        collect(mesh);
        for (int round = 0; round < 6; ++round) {
            std::vector<int> all(static_cast<std::size_t>(mesh.num_elements()));
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            mesh = bisect(mesh, all);
            collect(mesh);
            if (std::abs(mesh.total_area() - 1.0) > 1e-12)
                return std::string("area not conserved after round ") + std::to_string(round);
        }
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        if (static_cast<int>(classes.size()) > 4 * initial)
            return fail_msg("similarity classes", static_cast<double>(classes.size()),
                            static_cast<double>(4 * initial));
        return std::string();
    }));

    out.push_back(run_check("p2_splitting_equivalence", [] {
        TriangleMesh mesh = make_unit_square_mesh(16);
        DCConfig cfg;
        cfg.seed = 3;
        CRFunction u = torsion(mesh, 2.0, cfg);
        FreeDofMap dofs = make_free_dof_map(mesh);
        SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
        std::vector<double> b = assemble_rhs(mesh, dofs, [](Vec2) { return 1.0; });
        CRFunction direct = expand_free(mesh, dofs, solve_spd(A, b));
        CRFunction d = u;
        for (std::size_t i = 0; i < d.dof.size(); ++i) d.dof[i] -= direct.dof[i];
        double rel = std::sqrt(lp_norm_p(mesh, d, 2.0) / lp_norm_p(mesh, direct, 2.0));
        return rel <= 1e-4 ? std::string() : fail_msg("relative L2 difference", rel, 1e-4);
    }));

    out.push_back(run_check("cr_eigen_residual", [] {
        // Converged pair nearly satisfies the discrete eigen-equation
        // sum_T int |grad u|^{p-2} grad u . grad v = mu int |u|^{p-2} u v.
        TriangleMesh mesh = make_unit_square_mesh(8);
        double worst = 0.0;
        for (double p : {2.0, 2.5}) {
            IISSConfig cfg;
            cfg.dc.seed = 11;
            DiscreteEigenpair pair = iiss(mesh, p, cfg);
            const QuadratureRule& rule = triangle_rule_degree4();
            std::mt19937_64 rng(17);
            FreeDofMap dofs = make_free_dof_map(mesh);
            for (int trial = 0; trial < 20; ++trial) {
                CRFunction v = make_cr_function(mesh);
                for (int e = 0; e < mesh.num_edges(); ++e)
                    if (dofs.free_of_edge[static_cast<std::size_t>(e)] >= 0)
                        v.dof[static_cast<std::size_t>(e)] = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
                double vnorm = std::pow(broken_seminorm_p(mesh, v, p), 1.0 / p);
                double resid = 0.0;
                for (int t = 0; t < mesh.num_elements(); ++t) {
                    double a = mesh.element_area(t);
                    Vec2 gu = broken_gradient(mesh, pair.u, t);
                    Vec2 gv = broken_gradient(mesh, v, t);
                    double gn = norm(gu);
                    if (gn > 0.0) resid += a * std::pow(gn, p - 2.0) * dot(gu, gv);
                    for (int q = 0; q < 6; ++q) {
                        const Bary& bq = rule.points[static_cast<std::size_t>(q)];
                        double uu = eval_on_element(mesh, pair.u, t, bq);
                        double vv = eval_on_element(mesh, v, t, bq);
                        resid -= a * rule.weights[static_cast<std::size_t>(q)] * pair.mu *
                                 signed_pow(uu, p - 1.0) * vv;
                    }
                }
                worst = std::max(worst, std::abs(resid) / vnorm);
            }
        }
        return worst <= 1e-3 ? std::string() : fail_msg("eigen-residual", worst, 1e-3);
    }));

    return out;
}

} // namespace plapeig
