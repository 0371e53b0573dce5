// plapeig: first Dirichlet eigenpair of the p-Laplacian on polygonal
// domains by an adaptive Crouzeix-Raviart method.
//
//   plapeig run     adaptive eigenvalue computation (trace.csv + per-level files)
//   plapeig torsion one solve of -div(|grad u|^{p-2} grad u) = 1
//   plapeig bvp     same solve, reported as a boundary-value problem
//   plapeig verify  built-in oracle checks

#include <CLI11.hpp>

#include "plapeig/driver.hpp"

namespace {

void add_common_options(CLI::App* sub, plapeig::RunSpec& spec) {
    sub->set_config("--config", "", "key=value config file; command-line flags win");
    sub->add_option("--domain", spec.domain, "square, lshape or file:<path>")
        ->capture_default_str();
    sub->add_option("--p", spec.p, "exponent p > 1")->capture_default_str();
    sub->add_option("--n", spec.n, "initial grid resolution (0 = domain default)")
        ->capture_default_str();
    sub->add_option("--seed", spec.seed, "RNG seed for the splitting fields")
        ->envname("PLAP_SEED")
        ->capture_default_str();
    sub->add_option("--eps-n", spec.eps_n, "splitting stopping tolerance")->capture_default_str();
    sub->add_option("--out", spec.out_dir, "output directory (must exist)")->capture_default_str();
    sub->add_option("--threads", spec.threads, "element-parallel assembly/estimation threads")
        ->capture_default_str();
    sub->add_flag("--verbose", spec.verbose, "per-iteration logging to stderr");
}

void add_run_options(CLI::App* sub, plapeig::RunSpec& spec) {
    sub->add_option("--theta", spec.theta, "Doerfler bulk parameter in (0,1]")->capture_default_str();
    sub->add_option("--eps-k", spec.eps_k, "eigenvalue stopping tolerance between levels")
        ->capture_default_str();
    sub->add_option("--eps-m", spec.eps_m, "inverse-iteration stopping tolerance")
        ->capture_default_str();
    sub->add_option("--K", spec.max_loops, "maximum adaptive level index")->capture_default_str();
    sub->add_option("--lambda-ref", spec.lambda_ref,
                    "reference eigenvalue; enables the e_mu trace footer");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"first p-Laplacian Dirichlet eigenpair by adaptive nonconforming FEM"};
    app.require_subcommand(1);

    plapeig::RunSpec spec;
    CLI::App* run = app.add_subcommand("run", "adaptive eigenvalue run");
    add_common_options(run, spec);
    add_run_options(run, spec);

    CLI::App* torsion = app.add_subcommand("torsion", "torsion problem on the initial mesh");
    add_common_options(torsion, spec);

    CLI::App* bvp = app.add_subcommand("bvp", "one p-Laplacian solve with f = 1");
    add_common_options(bvp, spec);

    double jump_perturbation = 0.0;
    CLI::App* verify = app.add_subcommand("verify", "run the built-in oracle checks");
    verify
        ->add_option("--perturb-jump", jump_perturbation,
                     "test hook: scale the jump closed form by (1+x)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return plapeig::cmd_run(spec);
        if (torsion->parsed()) return plapeig::cmd_torsion(spec);
        if (bvp->parsed()) return plapeig::cmd_bvp(spec);
        plapeig::VerifyOptions opts;
        opts.jump_closed_form_perturbation = jump_perturbation;
        return plapeig::cmd_verify(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
