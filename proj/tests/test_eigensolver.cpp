#include <catch2/catch_amalgamated.hpp>

#include "plapeig/adapt.hpp"
#include "plapeig/eigensolver.hpp"

#include <cmath>
#include <numbers>

using namespace plapeig;

namespace {

// cyclic Jacobi eigensolver for small dense symmetric matrices (oracle)
void jacobi_eigen(std::vector<std::vector<double>>& B, std::vector<std::vector<double>>& V) {
    const int n = static_cast<int>(B.size());
    V.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) V[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                off += B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                       B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (off < 1e-24) break;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double bij = B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (std::abs(bij) < 1e-300) continue;
                double theta = 0.5 * std::atan2(2.0 * bij,
                                                B[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] -
                                                    B[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]);
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < n; ++k) {
                    double bik = B[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
                    double bjk = B[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                    B[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = c * bik - s * bjk;
                    B[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = s * bik + c * bjk;
                }
                for (int k = 0; k < n; ++k) {
                    double bki = B[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
                    double bkj = B[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                    B[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = c * bki - s * bkj;
                    B[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = s * bki + c * bkj;
                }
                for (int k = 0; k < n; ++k) {
                    double vki = V[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
                    double vkj = V[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                    V[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = c * vki - s * vkj;
                    V[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = s * vki + c * vkj;
                }
            }
        }
    }
}

std::vector<double> cr_mass_diagonal(const TriangleMesh& mesh, const FreeDofMap& dofs) {
    std::vector<double> m(static_cast<std::size_t>(dofs.n_free), 0.0);
    for (int t = 0; t < mesh.num_elements(); ++t)
        for (int i = 0; i < 3; ++i) {
            int fi = dofs.free_of_edge[static_cast<std::size_t>(mesh.element_edge(t, i))];
            if (fi >= 0) m[static_cast<std::size_t>(fi)] += mesh.element_area(t) / 3.0;
        }
    return m;
}

} // namespace

TEST_CASE("rayleigh quotient is scale invariant and positive") {
    TriangleMesh mesh = make_unit_square_mesh(4);
    CRFunction v = interpolate_cr(
        mesh, [](Vec2 x) { return x.x * (1.0 - x.x) * x.y * (1.0 - x.y); }, true);
    for (double p : {1.5, 2.0, 3.0}) {
        double base = rayleigh_quotient(mesh, v, p);
        REQUIRE(base > 0.0);
        CRFunction w = v;
        for (double& d : w.dof) d *= -7.25;
        REQUIRE(rayleigh_quotient(mesh, w, p) == Catch::Approx(base).epsilon(1e-12));
    }
    CRFunction zero = make_cr_function(mesh);
    REQUIRE_THROWS_AS(rayleigh_quotient(mesh, zero, 2.0), std::invalid_argument);
}

TEST_CASE("p=2 eigenvalue approaches two pi squared from below") {
    TriangleMesh mesh = make_unit_square_mesh(24);
    IISSConfig cfg;
    cfg.dc.seed = 13;
    DiscreteEigenpair pair = iiss(mesh, 2.0, cfg);
    const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
    REQUIRE(pair.mu < exact);
    REQUIRE(pair.mu > exact * 0.995);
    REQUIRE(pair.iterations >= 1);
    REQUIRE(pair.generation == mesh.generation());
}

TEST_CASE("p=2 eigenpair matches the dense generalized oracle") {
    TriangleMesh mesh = make_unit_square_mesh(6);
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    std::vector<double> mdiag = cr_mass_diagonal(mesh, dofs);
    const int n = A.n;

    // densify B = M^{-1/2} A M^{-1/2}
    std::vector<std::vector<double>> B(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
    std::vector<double> e(static_cast<std::size_t>(n), 0.0), col(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        e[static_cast<std::size_t>(j)] = 1.0;
        A.multiply(e, col);
        for (int i = 0; i < n; ++i)
            B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                col[static_cast<std::size_t>(i)] /
                std::sqrt(mdiag[static_cast<std::size_t>(i)] * mdiag[static_cast<std::size_t>(j)]);
        e[static_cast<std::size_t>(j)] = 0.0;
    }
    std::vector<std::vector<double>> V;
    jacobi_eigen(B, V);
    int argmin = 0;
    for (int i = 1; i < n; ++i)
        if (B[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] <
            B[static_cast<std::size_t>(argmin)][static_cast<std::size_t>(argmin)])
            argmin = i;
    double lambda_min = B[static_cast<std::size_t>(argmin)][static_cast<std::size_t>(argmin)];

    IISSConfig cfg;
    cfg.eps_m = 1e-8;
    cfg.dc.seed = 9;
    DiscreteEigenpair pair = iiss(mesh, 2.0, cfg);
    REQUIRE(pair.mu == Catch::Approx(lambda_min).epsilon(1e-3));

    // eigenvector angle in the M inner product
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (int i = 0; i < n; ++i) {
        double ui = pair.u.dof[static_cast<std::size_t>(dofs.edge_of_free[static_cast<std::size_t>(i)])];
        double vi = V[static_cast<std::size_t>(i)][static_cast<std::size_t>(argmin)] /
                    std::sqrt(mdiag[static_cast<std::size_t>(i)]);
        double mi = mdiag[static_cast<std::size_t>(i)];
        uv += mi * ui * vi;
        uu += mi * ui * ui;
        vv += mi * vi * vi;
    }
    REQUIRE(std::abs(uv) / std::sqrt(uu * vv) > 1.0 - 1e-3);
}

TEST_CASE("eigenpair is normalized and sign fixed") {
    TriangleMesh mesh = make_unit_square_mesh(8);
    IISSConfig cfg;
    cfg.dc.seed = 4;
    for (double p : {1.5, 2.5}) {
        DiscreteEigenpair pair = iiss(mesh, p, cfg);
        REQUIRE(lp_norm_p(mesh, pair.u, p) == Catch::Approx(1.0).margin(1e-10));
        double mass = 0.0;
        for (double d : pair.u.dof) mass += d;
        REQUIRE(mass > 0.0);
        REQUIRE(pair.mu == Catch::Approx(rayleigh_quotient(mesh, pair.u, p)).epsilon(1e-14));
    }
}

TEST_CASE("warm started solve stays near the cold one") {
    TriangleMesh coarse = make_unit_square_mesh(6);
    IISSConfig cfg;
    cfg.dc.seed = 66;
    DCState carry;
    DiscreteEigenpair first = iiss(coarse, 2.5, cfg, nullptr, &carry);

    std::vector<int> all(static_cast<std::size_t>(coarse.num_elements()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    TriangleMesh fine = bisect(coarse, all);
    CRFunction warm = transfer_cr(coarse, first.u, fine);
    transfer_fields(coarse, fine, carry);
    carry.u = warm;
    DiscreteEigenpair second = iiss(fine, 2.5, cfg, &warm, &carry);
    REQUIRE(std::abs(second.mu - first.mu) / first.mu < 0.05);

    // cold solve on the same mesh agrees
    DiscreteEigenpair cold = iiss(fine, 2.5, cfg);
    REQUIRE(second.mu == Catch::Approx(cold.mu).epsilon(1e-3));
}

TEST_CASE("iiss rejects bad configurations and vanishing warm starts") {
    TriangleMesh mesh = make_unit_square_mesh(4);
    REQUIRE_THROWS_AS(iiss(mesh, 1.0), std::invalid_argument);
    IISSConfig bad;
    bad.eps_m = 0.0;
    REQUIRE_THROWS_AS(iiss(mesh, 2.0, bad), std::invalid_argument);
    IISSConfig tight;
    tight.eps_m = 1e-16;
    tight.max_iter = 1;
    REQUIRE_THROWS_AS(iiss(mesh, 2.0, tight), NonConvergenceError);
    CRFunction zero = make_cr_function(mesh);
    REQUIRE_THROWS_AS(iiss(mesh, 2.0, {}, &zero), NonConvergenceError);
}
