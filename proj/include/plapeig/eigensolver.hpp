#pragma once

#include "plapeig/plaplacian.hpp"

namespace plapeig {

// Rayleigh quotient J(v) = sum_T int_T |grad v|^p / sum_T int_T |v|^p.
inline double rayleigh_quotient(const TriangleMesh& mesh, const CRFunction& v, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("rayleigh_quotient: p must be > 1");
    double den = lp_norm_p(mesh, v, p);
    if (!(den > 0.0)) throw std::invalid_argument("rayleigh_quotient: zero function");
    return broken_seminorm_p(mesh, v, p) / den;
}

struct IISSConfig {
    double eps_m = 1e-5; // relative change of the eigenvalue statistic
    int max_iter = 1000; // the statistic contracts slowly for p far from 2
    DCConfig dc;
    bool verbose = false;

    void validate() const {
        if (!(eps_m > 0.0)) throw std::invalid_argument("IISSConfig: eps_m must be positive");
        if (max_iter < 1) throw std::invalid_argument("IISSConfig: max_iter must be >= 1");
        dc.validate();
    }
};

struct DiscreteEigenpair {
    double mu = 0.0;    // Rayleigh quotient of u
    CRFunction u;       // L^p-normalized, nonnegative representative
    int generation = 0;
    int iterations = 0; // inverse iterations used
};

// Normalized inverse iterative sub-solver scheme: starting from the torsion
// solution (or a caller-supplied warm start), repeatedly solve
//   -div(|grad u_m|^{p-2} grad u_m) = (u_{m-1}/||u_{m-1}||_inf)^{p-1}
// and stop when lambda_m = 1/||u_m||_inf^{p-1} settles to eps_m relative.
// lambda_m only drives the stopping test; the reported eigenvalue is the
// Rayleigh quotient of the converged, L^p-normalized iterate. The
// decomposition state is carried across iterations (warm starts); passing
// carry keeps it across calls as well, which matters for p far from 2
// where cold splitting runs are slow.
inline DiscreteEigenpair iiss(const TriangleMesh& mesh, double p, const IISSConfig& cfg = {},
                              const CRFunction* warm_start = nullptr, DCState* carry = nullptr) {
    if (!(p > 1.0)) throw std::invalid_argument("iiss: p must be > 1");
    cfg.validate();

    DCConfig dc = cfg.dc;
    DCState local;
    DCState& state = carry ? *carry : local;
    CRFunction u;
    if (warm_start) {
        check_bound(mesh, *warm_start);
        u = *warm_start;
        state.u = u;
    } else {
        u = torsion(mesh, p, dc, &state);
    }

    auto lambda_of = [&](const CRFunction& v) {
        double m = linf_norm(mesh, v);
        if (!(m > 0.0)) throw NonConvergenceError("iiss: iterate vanished", 0.0);
        return 1.0 / std::pow(m, p - 1.0);
    };

    double lambda_prev = lambda_of(u);
    int m = 0;
    bool converged = false;
    for (m = 1; m <= cfg.max_iter; ++m) {
        const double peak = linf_norm(mesh, u);
        const CRFunction& up = u;
        ElementFn f = [&](int t, const Bary& b, const Vec2&) {
            return signed_pow(eval_on_element(mesh, up, t, b) / peak, p - 1.0);
        };
        CRFunction next = solve_plaplacian(mesh, f, p, dc, &state);
        double lambda = lambda_of(next);
        double rel = std::abs(lambda - lambda_prev) / std::abs(lambda_prev);
        if (cfg.verbose) std::fprintf(stderr, "iiss_iter %d lambda %.9g rel_change %.3e\n", m, lambda, rel);
        u = std::move(next);
        lambda_prev = lambda;
        if (rel < cfg.eps_m) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonConvergenceError("iiss: eigenvalue statistic did not settle within max_iter", 0.0);

    // Nonnegative representative, then L^p normalization.
    double mass = 0.0;
    for (double d : u.dof) mass += d;
    if (mass < 0.0)
        for (double& d : u.dof) d = -d;
    double scale = std::pow(lp_norm_p(mesh, u, p), 1.0 / p);
    for (double& d : u.dof) d /= scale;

    DiscreteEigenpair pair;
    pair.mu = rayleigh_quotient(mesh, u, p);
    pair.u = std::move(u);
    pair.generation = mesh.generation();
    pair.iterations = m;
    return pair;
}

} // namespace plapeig
