#include <catch2/catch_amalgamated.hpp>

#include "plapeig/assembly.hpp"

#include <cmath>
#include <random>

using namespace plapeig;

namespace {

std::vector<double> matvec(const SparseSymMatrix& A, const std::vector<double>& x) {
    std::vector<double> y(x.size());
    A.multiply(x, y);
    return y;
}

// dense Gaussian elimination with partial pivoting (test oracle)
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
                std::abs(A[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
                piv = r;
        std::swap(A[static_cast<std::size_t>(col)], A[static_cast<std::size_t>(piv)]);
        std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
        for (int r = col + 1; r < n; ++r) {
            double f = A[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
                       A[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
            for (int c = col; c < n; ++c)
                A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
                    f * A[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c)
            s -= A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = s / A[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
    }
    return x;
}

SparseSymMatrix from_dense(const std::vector<std::vector<double>>& D) {
    std::vector<detail::Triplet> trip;
    const int n = static_cast<int>(D.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (D[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] != 0.0)
                trip.push_back({i, j, D[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]});
    return detail::csr_from_triplets(n, trip);
}

} // namespace

TEST_CASE("free dof map indexes interior edges") {
    TriangleMesh mesh = make_unit_square_mesh(3);
    FreeDofMap dofs = make_free_dof_map(mesh);
    REQUIRE(dofs.n_free == mesh.num_interior_edges());
    int count = 0;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        int fi = dofs.free_of_edge[static_cast<std::size_t>(e)];
        if (mesh.edges()[static_cast<std::size_t>(e)].boundary) {
            REQUIRE(fi == -1);
        } else {
            REQUIRE(fi >= 0);
            REQUIRE(dofs.edge_of_free[static_cast<std::size_t>(fi)] == e);
            ++count;
        }
    }
    REQUIRE(count == dofs.n_free);
}

TEST_CASE("local stiffness of the unit right triangle") {
    TriangleMesh mesh = TriangleMesh::from_raw({{0, 0}, {1, 0}, {0, 1}}, {Element{{0, 1, 2}, 0}});
    CrGeometry geo(mesh);
    const double expect[3][3] = {{4, -2, -2}, {-2, 2, 0}, {-2, 0, 2}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double a = geo.area[0] * dot(geo.grad[0][static_cast<std::size_t>(i)],
                                         geo.grad[0][static_cast<std::size_t>(j)]);
            REQUIRE(a == Catch::Approx(expect[i][j]).margin(1e-14));
        }
}

TEST_CASE("stiffness reproduces the broken Dirichlet energy") {
    TriangleMesh mesh = make_unit_square_mesh(3);
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(dofs.n_free));
    for (double& v : x) v = uni(rng);
    std::vector<double> Ax = matvec(A, x);
    double quad = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) quad += x[i] * Ax[i];
    CRFunction v = expand_free(mesh, dofs, x);
    REQUIRE(quad == Catch::Approx(broken_seminorm_p(mesh, v, 2.0)).epsilon(1e-12));
}

TEST_CASE("assembled matrix is symmetric with a cached diagonal") {
    TriangleMesh mesh = make_unit_square_mesh(3);
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    const int n = A.n;
    std::vector<double> ei(static_cast<std::size_t>(n), 0.0), ej(static_cast<std::size_t>(n), 0.0);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 12; ++trial) {
        int i = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        int j = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        ei[static_cast<std::size_t>(i)] = 1.0;
        ej[static_cast<std::size_t>(j)] = 1.0;
        std::vector<double> Ai = matvec(A, ei);
        std::vector<double> Aj = matvec(A, ej);
        REQUIRE(Ai[static_cast<std::size_t>(j)] == Catch::Approx(Aj[static_cast<std::size_t>(i)]).margin(1e-15));
        REQUIRE(Ai[static_cast<std::size_t>(i)] == Catch::Approx(A.diag[static_cast<std::size_t>(i)]).margin(1e-15));
        REQUIRE(A.diag[static_cast<std::size_t>(i)] > 0.0);
        ei[static_cast<std::size_t>(i)] = 0.0;
        ej[static_cast<std::size_t>(j)] = 0.0;
    }
}

TEST_CASE("unit load integrates each basis function to area over three") {
    TriangleMesh mesh = make_unit_square_mesh(2);
    FreeDofMap dofs = make_free_dof_map(mesh);
    std::vector<double> b = assemble_rhs(mesh, dofs, [](Vec2) { return 1.0; });
    for (int fi = 0; fi < dofs.n_free; ++fi) {
        int e = dofs.edge_of_free[static_cast<std::size_t>(fi)];
        double expect = 0.0;
        const Edge& ed = mesh.edges()[static_cast<std::size_t>(e)];
        expect += mesh.element_area(ed.elem[0]) / 3.0;
        if (ed.elem[1] >= 0) expect += mesh.element_area(ed.elem[1]) / 3.0;
        REQUIRE(b[static_cast<std::size_t>(fi)] == Catch::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("constant vector fields produce a vanishing divergence load") {
    // sum_T |T| g . grad phi_F = |F| g . (n_F^+ + n_F^-) = 0 on interior
    // faces, because CR basis functions have unit mean on their own face
    // and zero mean on every other face.
    TriangleMesh mesh = make_unit_square_mesh(3);
    FreeDofMap dofs = make_free_dof_map(mesh);
    std::vector<Vec2> g(static_cast<std::size_t>(mesh.num_elements()), Vec2{0.7, -0.3});
    std::vector<double> b = assemble_rhs(mesh, dofs, [](Vec2) { return 0.0; }, &g);
    for (double v : b) REQUIRE(std::abs(v) < 1e-13);
}

TEST_CASE("rhs assembly is identical across thread counts") {
    TriangleMesh mesh = make_unit_square_mesh(5);
    FreeDofMap dofs = make_free_dof_map(mesh);
    std::vector<Vec2> g(static_cast<std::size_t>(mesh.num_elements()));
    for (int t = 0; t < mesh.num_elements(); ++t)
        g[static_cast<std::size_t>(t)] = Vec2{std::sin(0.1 * t), std::cos(0.2 * t)};
    auto f = [](Vec2 x) { return std::exp(x.x - x.y); };
    std::vector<double> b1 = assemble_rhs(mesh, dofs, f, &g, 1);
    std::vector<double> b4 = assemble_rhs(mesh, dofs, f, &g, 4);
    REQUIRE(b1 == b4);
}

TEST_CASE("pcg matches a dense oracle") {
    const int n = 40;
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<std::vector<double>> M(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n)));
    for (auto& row : M)
        for (double& v : row) v = uni(rng);
    std::vector<std::vector<double>> D(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += M[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                     M[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            D[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s + (i == j ? n : 0.0);
        }
    std::vector<double> b(static_cast<std::size_t>(n));
    for (double& v : b) v = uni(rng);

    SparseSymMatrix A = from_dense(D);
    LinearSolveConfig cfg;
    cfg.rel_tol = 1e-12;
    std::vector<double> x = solve_spd(A, b, cfg);
    std::vector<double> ref = dense_solve(D, b);
    for (int i = 0; i < n; ++i)
        REQUIRE(x[static_cast<std::size_t>(i)] ==
                Catch::Approx(ref[static_cast<std::size_t>(i)]).margin(1e-9));

    // residual guarantee
    std::vector<double> r = matvec(A, x);
    double rn = 0.0, bn = 0.0;
    for (int i = 0; i < n; ++i) {
        rn += (r[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) *
              (r[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
        bn += b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
    }
    REQUIRE(std::sqrt(rn) <= 1.01 * cfg.rel_tol * std::sqrt(bn));
}

TEST_CASE("pcg corner cases") {
    SparseSymMatrix A = from_dense({{2.0, -1.0}, {-1.0, 2.0}});
    // zero right-hand side short-circuits to zero
    std::vector<double> x = solve_spd(A, {0.0, 0.0});
    REQUIRE(x == std::vector<double>{0.0, 0.0});
    // warm start at the solution returns it unchanged
    std::vector<double> sol{1.0, 1.0};
    std::vector<double> b = matvec(A, sol);
    std::vector<double> again = solve_spd(A, b, {}, &sol);
    REQUIRE(again == sol);
}

TEST_CASE("pcg rejects non-spd input") {
    {
        SparseSymMatrix A = from_dense({{1.0, 2.0}, {2.0, 1.0}}); // eigenvalues 3, -1
        REQUIRE_THROWS_AS(solve_spd(A, {1.0, -1.0}), NotSpdError);
    }
    {
        std::vector<detail::Triplet> trip{{0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 2.0}};
        SparseSymMatrix A = detail::csr_from_triplets(2, trip); // zero diagonal
        REQUIRE_THROWS_AS(solve_spd(A, {1.0, 1.0}), NotSpdError);
    }
}

TEST_CASE("pcg reports the achieved residual when the budget runs out") {
    TriangleMesh mesh = make_unit_square_mesh(6);
    FreeDofMap dofs = make_free_dof_map(mesh);
    SparseSymMatrix A = assemble_cr_stiffness(mesh, dofs);
    std::vector<double> b(static_cast<std::size_t>(A.n), 1.0);
    LinearSolveConfig cfg;
    cfg.max_iter = 1;
    cfg.rel_tol = 1e-14;
    try {
        solve_spd(A, b, cfg);
        FAIL("expected SolverFailure");
    } catch (const SolverFailure& e) {
        REQUIRE(e.achieved_residual > 0.0);
    }
}

TEST_CASE("expand_free scatters free values and zeroes the boundary") {
    TriangleMesh mesh = make_unit_square_mesh(2);
    FreeDofMap dofs = make_free_dof_map(mesh);
    std::vector<double> x(static_cast<std::size_t>(dofs.n_free));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) + 1.0;
    CRFunction v = expand_free(mesh, dofs, x);
    REQUIRE(v.generation == mesh.generation());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        int fi = dofs.free_of_edge[static_cast<std::size_t>(e)];
        if (fi < 0)
            REQUIRE(v.dof[static_cast<std::size_t>(e)] == 0.0);
        else
            REQUIRE(v.dof[static_cast<std::size_t>(e)] == x[static_cast<std::size_t>(fi)]);
    }
}

TEST_CASE("duplicate triplets are summed") {
    std::vector<detail::Triplet> trip{{0, 0, 1.0}, {0, 0, 1.5}, {0, 1, -1.0},
                                      {1, 0, -1.0}, {1, 1, 3.0}};
    SparseSymMatrix A = detail::csr_from_triplets(2, trip);
    std::vector<double> y = matvec(A, {1.0, 0.0});
    REQUIRE(y[0] == Catch::Approx(2.5).margin(1e-15));
    REQUIRE(y[1] == Catch::Approx(-1.0).margin(1e-15));
    REQUIRE(A.diag[0] == Catch::Approx(2.5).margin(1e-15));
}
