#pragma once

#include <filesystem>
#include <iostream>

#include "plapeig/verify.hpp"

namespace plapeig {

// One CLI invocation. Field defaults are the experiment defaults; n = 0
// picks the per-domain initial resolution.
struct RunSpec {
    std::string domain = "square"; // square | lshape | file:<path>
    double p = 2.0;
    double theta = 0.6;
    double eps_k = 1e-4;
    double eps_m = 1e-5;
    double eps_n = 1e-5;
    int max_loops = 9; // K
    int n = 0;
    std::uint64_t seed = 1;
    std::optional<double> lambda_ref;
    std::string out_dir = ".";
    int threads = 1;
    bool verbose = false;
};

inline std::pair<Domain, std::string> parse_domain(const std::string& spec) {
    if (spec == "square") return {Domain::Square, {}};
    if (spec == "lshape") return {Domain::LShape, {}};
    if (spec.rfind("file:", 0) == 0 && spec.size() > 5) return {Domain::File, spec.substr(5)};
    throw std::invalid_argument("domain must be square, lshape or file:<path>, got '" + spec + "'");
}

inline AdaptiveConfig to_adaptive_config(const RunSpec& spec) {
    AdaptiveConfig cfg;
    auto [dom, path] = parse_domain(spec.domain);
    cfg.domain = dom;
    cfg.mesh_path = path;
    cfg.p = spec.p;
    cfg.theta = spec.theta;
    cfg.eps_k = spec.eps_k;
    cfg.max_loops = spec.max_loops;
    cfg.initial_resolution = spec.n;
    cfg.seed = spec.seed;
    cfg.iiss.eps_m = spec.eps_m;
    cfg.iiss.dc.eps_n = spec.eps_n;
    cfg.threads = spec.threads;
    cfg.verbose = spec.verbose;
    cfg.validate();
    return cfg;
}

namespace detail {

inline void write_trace_header(std::ostream& os) {
    os << "k,dof,mu,eta1,eta2,glb,glb_guard_ok,rel_change,seconds\n";
}

inline void write_trace_row(std::ostream& os, const LevelRecord& r) {
    os.precision(9);
    os << r.k << ',' << r.dof << ',' << r.mu << ',' << r.eta1 << ',' << r.eta2 << ',' << r.glb
       << ',' << (r.glb_guard_ok ? 1 : 0) << ',' << r.rel_change << ',' << r.seconds << '\n';
}

inline int require_out_dir(const RunSpec& spec, std::ostream& err) {
    std::error_code ec;
    if (!std::filesystem::is_directory(spec.out_dir, ec)) {
        err << "error: output directory '" << spec.out_dir << "' does not exist\n";
        return 2;
    }
    return 0;
}

} // namespace detail

// Adaptive eigenvalue run. Writes trace.csv incrementally (a partial trace
// survives solver failures), one mesh_k.plapmesh and solution_k.csv per
// level, and an e_mu footer when a reference eigenvalue is supplied.
inline int cmd_run(const RunSpec& spec, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    if (int rc = detail::require_out_dir(spec, err)) return rc;
    AdaptiveConfig cfg;
    try {
        cfg = to_adaptive_config(spec);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    std::filesystem::path dir(spec.out_dir);
    std::ofstream trace_os(dir / "trace.csv");
    if (!trace_os) {
        err << "error: cannot write " << (dir / "trace.csv").string() << '\n';
        return 2;
    }
    detail::write_trace_header(trace_os);

    out.precision(9);
    AdaptiveTrace trace;
    try {
        trace = adaptive_loop(cfg, [&](const LevelInfo& info) {
            detail::write_trace_row(trace_os, info.record);
            trace_os.flush();
            int k = info.record.k;
            write_plapmesh(info.mesh, (dir / ("mesh_" + std::to_string(k) + ".plapmesh")).string());
            std::ofstream sol(dir / ("solution_" + std::to_string(k) + ".csv"));
            write_solution_csv(info.mesh, info.u, sol);
            out << "k=" << k << " dof=" << info.record.dof << " mu=" << info.record.mu
                << " eta1=" << info.record.eta1 << " eta2=" << info.record.eta2 << '\n';
        });
    } catch (const AdaptiveLoopError& e) {
        trace_os.flush();
        err << "error: " << e.what() << " (partial trace written)\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    const LevelRecord& last = trace.levels.back();
    out << "final mu = " << last.mu << " at dof = " << last.dof << '\n';
    if (spec.lambda_ref) {
        // glb stores mu^{1/p}/(1+2M mu^{1/p}) to the p-th power, so the gap
        // needs no second mesh pass.
        double gap = std::pow(*spec.lambda_ref, 1.0 / spec.p) - std::pow(last.glb, 1.0 / spec.p);
        trace_os << "# e_mu," << gap << '\n';
        out << "e_mu = " << gap << '\n';
    }
    return 0;
}

namespace detail {

// Shared by cmd_bvp and cmd_torsion: one decomposition-coordination solve
// of -div(|grad u|^{p-2} grad u) = 1 on the initial mesh.
inline int run_single_solve(const RunSpec& spec, const char* label, std::ostream& out,
                            std::ostream& err) {
    if (int rc = require_out_dir(spec, err)) return rc;
    try {
        AdaptiveConfig cfg = to_adaptive_config(spec);
        TriangleMesh mesh = make_initial_mesh(cfg);
        DCConfig dc = cfg.iiss.dc;
        dc.seed = spec.seed;
        dc.threads = spec.threads;
        dc.verbose = spec.verbose;
        DCDiagnostics diag;
        CRFunction u = torsion(mesh, spec.p, dc, nullptr, &diag);

        std::filesystem::path dir(spec.out_dir);
        std::ofstream sol(dir / "solution.csv");
        write_solution_csv(mesh, u, sol);
        std::ofstream log(dir / "convergence.csv");
        log << "iter,rel_change\n";
        log.precision(9);
        for (std::size_t i = 0; i < diag.rel_changes.size(); ++i)
            log << (i + 1) << ',' << diag.rel_changes[i] << '\n';

        out.precision(9);
        out << label << ": p=" << spec.p << " dof=" << mesh.num_interior_edges()
            << " iterations=" << diag.iterations << " linf=" << linf_norm(mesh, u)
            << " optimality_residual=" << diag.optimality_residual << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace detail

inline int cmd_bvp(const RunSpec& spec, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    return detail::run_single_solve(spec, "bvp", out, err);
}

inline int cmd_torsion(const RunSpec& spec, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    return detail::run_single_solve(spec, "torsion", out, err);
}

inline int cmd_verify(const VerifyOptions& opts = {}, std::ostream& out = std::cout) {
    std::vector<CheckResult> results = run_verification_suite(opts);
    bool all = true;
    for (const CheckResult& r : results) {
        out << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
        all = all && r.pass;
    }
    out << (all ? "verify: all checks passed\n" : "verify: FAILURES\n");
    return all ? 0 : 1;
}

} // namespace plapeig
