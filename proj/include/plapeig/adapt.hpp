#pragma once

#include <chrono>
#include <optional>

#include "plapeig/eigensolver.hpp"

namespace plapeig {

struct EstimatorReport {
    std::vector<double> eta1; // mu^q h_T^q ||u||_{L^p(T)}^p
    std::vector<double> eta2; // face-jump terms collected per element
    double eta1_total = 0.0;
    double eta2_total = 0.0;
};

// Volume and jump error indicators for a discrete eigenpair (mu, u).
// q = p/(p-1). Interior faces contribute h_F ||[u]||^p_{L^p(F)} split evenly
// between their two elements; boundary faces contribute the full trace term
// to their single element.
inline EstimatorReport estimate(const TriangleMesh& mesh, double mu, const CRFunction& u, double p,
                                int threads = 1) {
    if (!(p > 1.0)) throw std::invalid_argument("estimate: p must be > 1");
    if (!(mu > 0.0)) throw std::invalid_argument("estimate: mu must be positive");
    check_bound(mesh, u);
    const double q = p / (p - 1.0);
    const int ne = mesh.num_elements();

    EstimatorReport rep;
    rep.eta1.assign(static_cast<std::size_t>(ne), 0.0);
    rep.eta2.assign(static_cast<std::size_t>(ne), 0.0);

    const double mu_q = std::pow(mu, q);
    parallel_for(ne, threads, [&](int begin, int end) {
        for (int t = begin; t < end; ++t) {
            double h = element_size(mesh, t);
            rep.eta1[static_cast<std::size_t>(t)] =
                mu_q * std::pow(h, q) * element_lp_norm_p(mesh, u, p, t);
        }
    });

    std::vector<double> face_term(static_cast<std::size_t>(mesh.num_edges()), 0.0);
    parallel_for(mesh.num_edges(), threads, [&](int begin, int end) {
        for (int e = begin; e < end; ++e)
            face_term[static_cast<std::size_t>(e)] = face_size(mesh, e) * jump_lp_norm_p(mesh, u, e, p);
    });
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Edge& ed = mesh.edges()[static_cast<std::size_t>(e)];
        if (ed.boundary) {
            rep.eta2[static_cast<std::size_t>(ed.elem[0])] += face_term[static_cast<std::size_t>(e)];
        } else {
            rep.eta2[static_cast<std::size_t>(ed.elem[0])] += 0.5 * face_term[static_cast<std::size_t>(e)];
            rep.eta2[static_cast<std::size_t>(ed.elem[1])] += 0.5 * face_term[static_cast<std::size_t>(e)];
        }
    }

    for (int t = 0; t < ne; ++t) {
        rep.eta1_total += rep.eta1[static_cast<std::size_t>(t)];
        rep.eta2_total += rep.eta2[static_cast<std::size_t>(t)];
    }
    return rep;
}

// Smallest set M with sum_{T in M} v_T >= theta * sum_T v_T, built greedily
// from the largest indicators; ties at the cutoff are broken by ascending
// element index. All-zero input degenerates to {largest index}. The result
// is sorted ascending.
inline std::vector<int> dorfler_mark(const std::vector<double>& values, double theta) {
    if (!(theta > 0.0) || theta > 1.0) throw std::invalid_argument("dorfler_mark: theta must be in (0,1]");
    if (values.empty()) throw std::invalid_argument("dorfler_mark: empty indicator vector");
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0)) throw std::invalid_argument("dorfler_mark: indicators must be nonnegative");
        total += v;
    }
    if (total == 0.0) return {static_cast<int>(values.size()) - 1};

    std::vector<int> order(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        double va = values[static_cast<std::size_t>(a)], vb = values[static_cast<std::size_t>(b)];
        return va != vb ? va > vb : a < b;
    });
    std::vector<int> marked;
    double acc = 0.0;
    for (int idx : order) {
        marked.push_back(idx);
        acc += values[static_cast<std::size_t>(idx)];
        if (acc >= theta * total) break;
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

// Guaranteed lower bound for the first eigenvalue,
//   bound = [ mu^{1/p} / (1 + (1+d/2) M mu^{1/p}) ]^p,   M = max_T diam(T).
// Valid when (1+d/2) M lambda^{1/p} < 1; the computable guard substitutes mu
// for the unknown lambda, and guard_ok reports it. unguarded always holds
// the formula value (it is what the reference gap e_mu is built from).
struct LowerBoundResult {
    double unguarded = 0.0;
    bool guard_ok = false;
    std::optional<double> bound() const {
        return guard_ok ? std::optional<double>(unguarded) : std::nullopt;
    }
};

inline LowerBoundResult lower_bound(double mu, const TriangleMesh& mesh, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("lower_bound: p must be > 1");
    if (!(mu > 0.0)) throw std::invalid_argument("lower_bound: mu must be positive");
    const double c = 2.0; // 1 + d/2 in d = 2
    const double M = max_element_diam(mesh);
    const double mu_root = std::pow(mu, 1.0 / p);
    LowerBoundResult r;
    r.guard_ok = c * M * mu_root < 1.0;
    r.unguarded = std::pow(mu_root / (1.0 + c * M * mu_root), p);
    return r;
}

// Reference gap e_mu = lambda_ref^{1/p} - mu^{1/p}/(1 + 2 M mu^{1/p}),
// computed unconditionally.
inline double reference_gap(double lambda_ref, double mu, double max_diam, double p) {
    double mu_root = std::pow(mu, 1.0 / p);
    return std::pow(lambda_ref, 1.0 / p) - mu_root / (1.0 + 2.0 * max_diam * mu_root);
}

// Children inherit the parent element's decomposition fields after
// refinement. Keeps the splitting solver near its fixed point across levels;
// a cold (random) start can need thousands of sweeps for p far from 2.
inline void transfer_fields(const TriangleMesh& from, const TriangleMesh& to, DCState& state) {
    const std::size_t ne_from = static_cast<std::size_t>(from.num_elements());
    if (state.xi.size() != ne_from || state.nu.size() != ne_from) {
        state.xi.clear();
        state.nu.clear();
        return;
    }
    ElementLocator locator(from);
    const std::size_t ne_to = static_cast<std::size_t>(to.num_elements());
    std::vector<Vec2> xi(ne_to, Vec2{0.0, 0.0}), nu(ne_to, Vec2{0.0, 0.0});
    for (int t = 0; t < to.num_elements(); ++t) {
        Vec2 c = to.point_from_bary(t, Bary{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        int parent = locator.locate(c);
        if (parent < 0) continue; // nested refinements never get here
        xi[static_cast<std::size_t>(t)] = state.xi[static_cast<std::size_t>(parent)];
        nu[static_cast<std::size_t>(t)] = state.nu[static_cast<std::size_t>(parent)];
    }
    state.xi = std::move(xi);
    state.nu = std::move(nu);
}

// Evaluates u (defined on from) at the edge midpoints of to; boundary dofs
// stay 0. Used to warm start the eigensolver after refinement.
inline CRFunction transfer_cr(const TriangleMesh& from, const CRFunction& u, const TriangleMesh& to) {
    check_bound(from, u);
    ElementLocator locator(from);
    CRFunction v = make_cr_function(to);
    for (int e = 0; e < to.num_edges(); ++e) {
        if (to.edges()[static_cast<std::size_t>(e)].boundary) continue;
        Vec2 m = to.edge_midpoint(e);
        int t = locator.locate(m);
        if (t < 0) continue; // leave 0; nested refinements never get here
        v.dof[static_cast<std::size_t>(e)] = eval_on_element(from, u, t, from.barycentric(t, m));
    }
    return v;
}

enum class Domain { Square, LShape, File };

struct AdaptiveConfig {
    double p = 2.0;
    double theta = 0.6;   // Doerfler bulk parameter, applied to eta1 and eta2 separately
    double eps_k = 1e-4;  // relative eigenvalue change between levels
    int max_loops = 9;    // K: index of the last level
    Domain domain = Domain::Square;
    std::string mesh_path;      // Domain::File
    int initial_resolution = 0; // 0 = domain default (square 12, L-shape 8)
    std::uint64_t seed = 1;
    IISSConfig iiss;
    int threads = 1;
    bool verbose = false;

    void validate() const {
        if (!(p > 1.0)) throw std::invalid_argument("AdaptiveConfig: p must be > 1");
        if (!(theta > 0.0) || theta > 1.0) throw std::invalid_argument("AdaptiveConfig: theta must be in (0,1]");
        if (!(eps_k > 0.0)) throw std::invalid_argument("AdaptiveConfig: eps_k must be positive");
        if (max_loops < 0) throw std::invalid_argument("AdaptiveConfig: max_loops must be >= 0");
        if (threads < 1) throw std::invalid_argument("AdaptiveConfig: threads must be >= 1");
        if (domain == Domain::File && mesh_path.empty())
            throw std::invalid_argument("AdaptiveConfig: mesh_path required for file domain");
        iiss.validate();
    }
};

inline TriangleMesh make_initial_mesh(const AdaptiveConfig& cfg) {
    switch (cfg.domain) {
        case Domain::Square:
            return make_unit_square_mesh(cfg.initial_resolution > 0 ? cfg.initial_resolution : 12);
        case Domain::LShape:
            return make_lshape_mesh(cfg.initial_resolution > 0 ? cfg.initial_resolution : 8);
        case Domain::File:
            return read_plapmesh(cfg.mesh_path);
    }
    throw std::invalid_argument("make_initial_mesh: unknown domain");
}

struct LevelRecord {
    int k = 0;
    int dof = 0; // interior edges
    double mu = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
    double glb = 0.0; // unguarded lower-bound value
    bool glb_guard_ok = false;
    double rel_change = std::numeric_limits<double>::quiet_NaN(); // NaN at k = 0
    double seconds = 0.0;
};

struct AdaptiveTrace {
    std::vector<LevelRecord> levels;
};

// Everything a per-level observer may want; references stay valid only for
// the duration of the callback.
struct LevelInfo {
    const LevelRecord& record;
    const TriangleMesh& mesh;
    const CRFunction& u;
    const EstimatorReport& report;
    const std::vector<int>& marked1;
    const std::vector<int>& marked2;
    const std::vector<int>& marked; // union, sorted
};

namespace detail {
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
    // splitmix64 round; decouples the per-level generators
    std::uint64_t z = seed + (k + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Adaptive loop: solve -> estimate -> mark -> refine, stopping when the
// eigenvalue settles to eps_k relative or after level max_loops. Level 0
// starts from the torsion problem; later levels warm start from the
// transferred eigenfunction. Failures are rethrown tagged with the level.
inline AdaptiveTrace adaptive_loop(const AdaptiveConfig& cfg,
                                   const std::function<void(const LevelInfo&)>& on_level = {}) {
    cfg.validate();
    TriangleMesh mesh = make_initial_mesh(cfg);

    AdaptiveTrace trace;
    CRFunction warm;
    bool have_warm = false;
    DCState carry;
    double mu_prev = 0.0;

    for (int k = 0; k <= cfg.max_loops; ++k) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            IISSConfig ic = cfg.iiss;
            ic.verbose = ic.verbose || cfg.verbose;
            ic.dc.verbose = ic.dc.verbose || cfg.verbose;
            ic.dc.threads = std::max(ic.dc.threads, cfg.threads);
            ic.dc.seed = detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(k));

            DiscreteEigenpair pair = iiss(mesh, cfg.p, ic, have_warm ? &warm : nullptr, &carry);
            EstimatorReport report = estimate(mesh, pair.mu, pair.u, cfg.p, cfg.threads);
            LowerBoundResult glb = lower_bound(pair.mu, mesh, cfg.p);

            std::vector<int> m1 = dorfler_mark(report.eta1, cfg.theta);
            std::vector<int> m2 = dorfler_mark(report.eta2, cfg.theta);
            std::vector<int> marked = m1;
            marked.insert(marked.end(), m2.begin(), m2.end());
            std::sort(marked.begin(), marked.end());
            marked.erase(std::unique(marked.begin(), marked.end()), marked.end());

            LevelRecord rec;
            rec.k = k;
            rec.dof = mesh.num_interior_edges();
            rec.mu = pair.mu;
            rec.eta1 = report.eta1_total;
            rec.eta2 = report.eta2_total;
            rec.glb = glb.unguarded;
            rec.glb_guard_ok = glb.guard_ok;
            if (k > 0) rec.rel_change = std::abs(mu_prev - pair.mu) / mu_prev;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            trace.levels.push_back(rec);

            if (on_level) on_level(LevelInfo{trace.levels.back(), mesh, pair.u, report, m1, m2, marked});
            if (cfg.verbose)
                std::fprintf(stderr, "level %d dof %d mu %.9g eta1 %.3e eta2 %.3e\n", k, rec.dof,
                             rec.mu, rec.eta1, rec.eta2);

            bool stop = (k > 0 && rec.rel_change < cfg.eps_k) || k == cfg.max_loops;
            if (stop) break;

            mu_prev = pair.mu;
            TriangleMesh refined = bisect(mesh, marked);
            warm = transfer_cr(mesh, pair.u, refined);
            transfer_fields(mesh, refined, carry);
            carry.u = warm;
            have_warm = true;
            mesh = std::move(refined);
        } catch (const std::invalid_argument&) {
            throw; // configuration problems are not level failures
        } catch (const AdaptiveLoopError&) {
            throw;
        } catch (const std::exception& e) {
            throw AdaptiveLoopError(k, e.what());
        }
    }
    return trace;
}

// trace.csv body; rel_change prints as nan at level 0, the guard flag as
// 0/1, everything with 9 significant digits. The optional reference gap is
// appended as a comment footer "# e_mu,<value>".
inline void write_trace_csv(const AdaptiveTrace& trace, std::ostream& os,
                            std::optional<double> e_mu = std::nullopt) {
    os << "k,dof,mu,eta1,eta2,glb,glb_guard_ok,rel_change,seconds\n";
    os.precision(9);
    for (const LevelRecord& r : trace.levels) {
        os << r.k << ',' << r.dof << ',' << r.mu << ',' << r.eta1 << ',' << r.eta2 << ',' << r.glb
           << ',' << (r.glb_guard_ok ? 1 : 0) << ',' << r.rel_change << ',' << r.seconds << '\n';
    }
    if (e_mu) os << "# e_mu," << *e_mu << '\n';
}

} // namespace plapeig
