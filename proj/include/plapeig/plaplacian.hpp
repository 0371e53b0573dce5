#pragma once

#include <cstdio>
#include <random>

#include "plapeig/assembly.hpp"

namespace plapeig {

// Solves |v|^{p-2} v + v = w componentwise in direction: v = s w/|w| where
// s >= 0 solves s^{p-1} + s = |w|. Safeguarded Newton on the monotone scalar
// equation; the bracket [0, max(|w|,1)] always contains the root.
inline Vec2 resolvent_vector(Vec2 w, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("resolvent_vector: p must be > 1");
    double r = norm(w);
    if (r == 0.0) return {0.0, 0.0};
    // g(s) = s^{p-1} + s - r is increasing with g(r) >= 0 and
    // g(r^{1/(p-1)}) >= 0, so the root lies in [0, min of the two].
    double lo = 0.0;
    double hi = std::min(r, std::pow(r, 1.0 / (p - 1.0)));
    double s = hi;
    for (int it = 0; it < 200; ++it) {
        double g = std::pow(s, p - 1.0) + s - r;
        if (std::abs(g) <= 1e-15 * (1.0 + r)) break;
        if (g < 0.0) lo = s; else hi = s;
        double gp = (p - 1.0) * std::pow(s, p - 2.0) + 1.0;
        double step = s - g / gp;
        s = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
        if (hi - lo <= 1e-17 * (1.0 + r)) break;
    }
    return (s / r) * w;
}

struct DCConfig {
    double eps_n = 1e-5;    // relative L2 change of consecutive iterates
    int max_outer = 2000;
    std::uint64_t seed = 1; // for the U(0,0.5) initialization of xi, nu
    int threads = 1;
    bool verbose = false;

    void validate() const {
        if (!(eps_n > 0.0)) throw std::invalid_argument("DCConfig: eps_n must be positive");
        if (max_outer < 2) throw std::invalid_argument("DCConfig: max_outer must be >= 2");
        if (threads < 1) throw std::invalid_argument("DCConfig: threads must be >= 1");
    }
};

// Decomposition state; pass the same object to consecutive solves on one
// mesh to warm start (xi, nu, u are reused when their sizes and generation
// match, otherwise xi, nu are drawn fresh from the seeded generator).
struct DCState {
    std::vector<Vec2> xi, nu;
    CRFunction u;
};

struct DCDiagnostics {
    std::vector<double> rel_changes;
    std::vector<double> energies; // sum_T |grad u|^p/p |T| - sum_T int_T f u
    double optimality_residual = 0.0; // max_T | |grad u|^{p-2} grad u - nu |
    int iterations = 0;
};

// Decomposition-coordination iteration for the p-Laplacian source problem
//   -div(|grad u|^{p-2} grad u) = f  on the Dirichlet CR space.
// Each sweep solves one broken Poisson problem with right-hand side
// div(xi_n - nu_{n-1}) + f, then updates nu by the pointwise resolvent and
// xi by the coordination step. Runs at least two sweeps; stops when the
// relative L2 change of consecutive iterates drops below eps_n (absolute
// fallback when the previous iterate vanishes).
inline CRFunction solve_plaplacian(const TriangleMesh& mesh, const ElementFn& f, double p,
                                   const DCConfig& cfg = {}, DCState* state = nullptr,
                                   DCDiagnostics* diag = nullptr) {
    if (!(p > 1.0)) throw std::invalid_argument("solve_plaplacian: p must be > 1");
    cfg.validate();

    const int ne = mesh.num_elements();
    CrGeometry geo(mesh);
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    // f is fixed for the whole call; only the div(xi - nu) part of the load
    // changes between sweeps.
    std::vector<double> load_f = assemble_rhs(mesh, dofs, f, nullptr, cfg.threads);

    std::vector<Vec2> xi, nu;
    CRFunction u = make_cr_function(mesh);
    bool warm_fields = state && static_cast<int>(state->xi.size()) == ne &&
                       static_cast<int>(state->nu.size()) == ne;
    if (warm_fields) {
        xi = state->xi;
        nu = state->nu;
    } else {
        std::mt19937_64 rng(cfg.seed);
        // uniform draw on [0, 0.5); 53-bit mantissa scaling keeps the stream
        // identical across platforms
        auto draw = [&rng] { return 0.5 * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
        xi.resize(static_cast<std::size_t>(ne));
        nu.resize(static_cast<std::size_t>(ne));
        for (int t = 0; t < ne; ++t) xi[static_cast<std::size_t>(t)] = {draw(), draw()};
        for (int t = 0; t < ne; ++t) nu[static_cast<std::size_t>(t)] = {draw(), draw()};
    }
    if (state && state->u.generation == mesh.generation() &&
        static_cast<int>(state->u.dof.size()) == mesh.num_edges())
        u = state->u;

    std::vector<double> x(static_cast<std::size_t>(dofs.n_free), 0.0);
    for (int i = 0; i < dofs.n_free; ++i)
        x[static_cast<std::size_t>(i)] = u.dof[static_cast<std::size_t>(dofs.edge_of_free[static_cast<std::size_t>(i)])];

    std::vector<Vec2> g(static_cast<std::size_t>(ne));
    std::vector<Vec2> grad_u(static_cast<std::size_t>(ne));
    std::vector<double> rhs(static_cast<std::size_t>(dofs.n_free));
    LinearSolveConfig lin;

    if (diag) {
        diag->rel_changes.clear();
        diag->energies.clear();
    }

    auto l2_norm = [&](const CRFunction& v) { return std::sqrt(lp_norm_p(mesh, v, 2.0)); };

    CRFunction u_prev = u;
    int n = 0;
    double rel = std::numeric_limits<double>::infinity();
    for (n = 1; n <= cfg.max_outer; ++n) {
        for (int t = 0; t < ne; ++t)
            g[static_cast<std::size_t>(t)] = xi[static_cast<std::size_t>(t)] - nu[static_cast<std::size_t>(t)];
        rhs = load_f;
        for (int t = 0; t < ne; ++t) {
            const auto& ee = mesh.element_edges(t);
            double a = geo.area[static_cast<std::size_t>(t)];
            for (int i = 0; i < 3; ++i) {
                int fi = dofs.free_of_edge[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])];
                if (fi >= 0)
                    rhs[static_cast<std::size_t>(fi)] -=
                        a * dot(g[static_cast<std::size_t>(t)], geo.grad[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
            }
        }
        x = solve_spd(A, rhs, lin, &x);
        u = expand_free(mesh, dofs, x);

        parallel_for(ne, cfg.threads, [&](int begin, int end) {
            for (int t = begin; t < end; ++t) {
                const auto& ee = mesh.element_edges(t);
                const auto& gr = geo.grad[static_cast<std::size_t>(t)];
                Vec2 gu{0.0, 0.0};
                for (int i = 0; i < 3; ++i)
                    gu += u.dof[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])] * gr[static_cast<std::size_t>(i)];
                grad_u[static_cast<std::size_t>(t)] = gu;
                Vec2 w = xi[static_cast<std::size_t>(t)] + gu;
                nu[static_cast<std::size_t>(t)] = resolvent_vector(w, p);
                xi[static_cast<std::size_t>(t)] = w - nu[static_cast<std::size_t>(t)];
            }
        });

        CRFunction d = u;
        for (std::size_t i = 0; i < d.dof.size(); ++i) d.dof[i] -= u_prev.dof[i];
        double num = l2_norm(d);
        double den = l2_norm(u_prev);
        rel = den > 0.0 ? num / den : num;
        if (diag) {
            diag->rel_changes.push_back(rel);
            double en = 0.0;
            const QuadratureRule& rule = triangle_rule_degree4();
            for (int t = 0; t < ne; ++t) {
                double a = geo.area[static_cast<std::size_t>(t)];
                en += a * std::pow(norm(grad_u[static_cast<std::size_t>(t)]), p) / p;
                for (int q = 0; q < 6; ++q) {
                    const Bary& bq = rule.points[static_cast<std::size_t>(q)];
                    Vec2 xq = mesh.point_from_bary(t, bq);
                    en -= a * rule.weights[static_cast<std::size_t>(q)] * f(t, bq, xq) *
                          eval_on_element(mesh, u, t, bq);
                }
            }
            diag->energies.push_back(en);
        }
        if (cfg.verbose) std::fprintf(stderr, "dc_iter %d rel_change %.3e\n", n, rel);
        u_prev = u;
        if (n >= 2 && rel <= cfg.eps_n) break;
    }
    if (n > cfg.max_outer)
        throw NonConvergenceError("solve_plaplacian: no convergence within max_outer sweeps", rel);

    double opt = 0.0;
    for (int t = 0; t < ne; ++t) {
        Vec2 gu = grad_u[static_cast<std::size_t>(t)];
        double gn = norm(gu);
        Vec2 flux = gn > 0.0 ? std::pow(gn, p - 2.0) * gu : Vec2{0.0, 0.0};
        opt = std::max(opt, norm(flux - nu[static_cast<std::size_t>(t)]));
    }
    if (diag) {
        diag->optimality_residual = opt;
        diag->iterations = n;
    }
    if (cfg.verbose) std::fprintf(stderr, "dc_done iters %d optimality_residual %.3e\n", n, opt);

    if (state) {
        state->xi = std::move(xi);
        state->nu = std::move(nu);
        state->u = u;
    }
    return u;
}

inline CRFunction solve_plaplacian(const TriangleMesh& mesh, const std::function<double(Vec2)>& f,
                                   double p, const DCConfig& cfg = {}, DCState* state = nullptr,
                                   DCDiagnostics* diag = nullptr) {
    return solve_plaplacian(mesh, plain_integrand(f), p, cfg, state, diag);
}

// Torsion problem -div(|grad u|^{p-2} grad u) = 1.
inline CRFunction torsion(const TriangleMesh& mesh, double p, const DCConfig& cfg = {},
                          DCState* state = nullptr, DCDiagnostics* diag = nullptr) {
    return solve_plaplacian(mesh, ElementFn([](int, const Bary&, const Vec2&) { return 1.0; }), p,
                            cfg, state, diag);
}

} // namespace plapeig
