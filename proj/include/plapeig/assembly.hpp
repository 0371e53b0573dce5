#pragma once

#include <functional>

#include "plapeig/cr_function.hpp"

namespace plapeig {

// Maps edge dofs to the free (interior-edge) unknowns of the homogeneous
// Dirichlet CR space. Boundary edges are constrained to 0.
struct FreeDofMap {
    std::vector<int> free_of_edge; // -1 on boundary edges
    std::vector<int> edge_of_free;
    int n_free = 0;
};

inline FreeDofMap make_free_dof_map(const TriangleMesh& mesh) {
    FreeDofMap m;
    m.free_of_edge.assign(static_cast<std::size_t>(mesh.num_edges()), -1);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        if (!mesh.edges()[static_cast<std::size_t>(e)].boundary) {
            m.free_of_edge[static_cast<std::size_t>(e)] = m.n_free;
            m.edge_of_free.push_back(e);
            ++m.n_free;
        }
    }
    return m;
}

// Symmetric sparse matrix in CSR form (both triangles stored).
struct SparseSymMatrix {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;
    std::vector<double> diag;

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
                s += val[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(i)] = s;
        }
    }
};

namespace detail {

struct Triplet {
    int r, c;
    double v;
};

inline SparseSymMatrix csr_from_triplets(int n, std::vector<Triplet>& trip) {
    // Stable sort keeps the element-order summation of duplicates
    // deterministic.
    std::stable_sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
        return a.r != b.r ? a.r < b.r : a.c < b.c;
    });
    SparseSymMatrix A;
    A.n = n;
    A.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < trip.size();) {
        std::size_t j = i;
        double s = 0.0;
        while (j < trip.size() && trip[j].r == trip[i].r && trip[j].c == trip[i].c) s += trip[j++].v;
        A.col.push_back(trip[i].c);
        A.val.push_back(s);
        ++A.row_ptr[static_cast<std::size_t>(trip[i].r) + 1];
        i = j;
    }
    for (int i = 0; i < n; ++i) A.row_ptr[static_cast<std::size_t>(i) + 1] += A.row_ptr[static_cast<std::size_t>(i)];
    A.diag.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = A.row_ptr[static_cast<std::size_t>(i)]; k < A.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            if (A.col[static_cast<std::size_t>(k)] == i) A.diag[static_cast<std::size_t>(i)] = A.val[static_cast<std::size_t>(k)];
    return A;
}

} // namespace detail

// Stiffness of the broken Laplacian on the Dirichlet CR space:
// A_ij = sum_T |T| grad phi_i . grad phi_j over interior-edge dofs.
inline SparseSymMatrix assemble_cr_stiffness(const TriangleMesh& mesh, const FreeDofMap& dofs) {
    std::vector<detail::Triplet> trip;
    trip.reserve(static_cast<std::size_t>(9 * mesh.num_elements()));
    CrGeometry geo(mesh);
    for (int t = 0; t < mesh.num_elements(); ++t) {
        const auto& ee = mesh.element_edges(t);
        const auto& g = geo.grad[static_cast<std::size_t>(t)];
        double a = geo.area[static_cast<std::size_t>(t)];
        for (int i = 0; i < 3; ++i) {
            int fi = dofs.free_of_edge[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])];
            if (fi < 0) continue;
            for (int j = 0; j < 3; ++j) {
                int fj = dofs.free_of_edge[static_cast<std::size_t>(ee[static_cast<std::size_t>(j)])];
                if (fj < 0) continue;
                trip.push_back({fi, fj, a * dot(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)])});
            }
        }
    }
    return detail::csr_from_triplets(dofs.n_free, trip);
}

// Element-aware integrand: (element id, barycentric point, physical point).
using ElementFn = std::function<double(int, const Bary&, const Vec2&)>;

inline ElementFn plain_integrand(std::function<double(Vec2)> f) {
    return [f = std::move(f)](int, const Bary&, const Vec2& x) { return f(x); };
}

// Load vector over the free dofs for the broken weak form
//   sum_T int_T f phi_i  -  sum_T (g|_T . grad phi_i) |T|,
// i.e. the right-hand side of -Delta u = div g + f after elementwise
// integration by parts with the face terms dropped. g is elementwise
// constant and may be null.
inline std::vector<double> assemble_rhs(const TriangleMesh& mesh, const FreeDofMap& dofs,
                                        const ElementFn& f, const std::vector<Vec2>* g = nullptr,
                                        int threads = 1) {
    if (g && static_cast<int>(g->size()) != mesh.num_elements())
        throw std::invalid_argument("assemble_rhs: g size mismatch");
    const int ne = mesh.num_elements();
    const QuadratureRule& rule = triangle_rule_degree4();
    const auto& phi = cr_basis_at_quadrature();
    CrGeometry geo(mesh);

    std::vector<std::array<double, 3>> contrib(static_cast<std::size_t>(ne));
    parallel_for(ne, threads, [&](int begin, int end) {
        for (int t = begin; t < end; ++t) {
            std::array<double, 3> c{0.0, 0.0, 0.0};
            double a = geo.area[static_cast<std::size_t>(t)];
            if (f) {
                for (int q = 0; q < 6; ++q) {
                    Vec2 x = mesh.point_from_bary(t, rule.points[static_cast<std::size_t>(q)]);
                    double fw = a * rule.weights[static_cast<std::size_t>(q)] *
                                f(t, rule.points[static_cast<std::size_t>(q)], x);
                    for (int i = 0; i < 3; ++i)
                        c[static_cast<std::size_t>(i)] += fw * phi[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)];
                }
            }
            if (g) {
                const Vec2 gt = (*g)[static_cast<std::size_t>(t)];
                for (int i = 0; i < 3; ++i)
                    c[static_cast<std::size_t>(i)] -= a * dot(gt, geo.grad[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
            }
            contrib[static_cast<std::size_t>(t)] = c;
        }
    });

    std::vector<double> b(static_cast<std::size_t>(dofs.n_free), 0.0);
    for (int t = 0; t < ne; ++t) {
        const auto& ee = mesh.element_edges(t);
        for (int i = 0; i < 3; ++i) {
            int fi = dofs.free_of_edge[static_cast<std::size_t>(ee[static_cast<std::size_t>(i)])];
            if (fi >= 0) b[static_cast<std::size_t>(fi)] += contrib[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        }
    }
    return b;
}

inline std::vector<double> assemble_rhs(const TriangleMesh& mesh, const FreeDofMap& dofs,
                                        const std::function<double(Vec2)>& f,
                                        const std::vector<Vec2>* g = nullptr, int threads = 1) {
    return assemble_rhs(mesh, dofs, plain_integrand(f), g, threads);
}

struct LinearSolveConfig {
    double rel_tol = 1e-10;
    int max_iter = 0; // 0 means 10 * dimension
};

// Jacobi-preconditioned conjugate gradients. Throws NotSpdError on a
// nonpositive-curvature direction and SolverFailure when the iteration
// budget runs out; b = 0 returns x = 0 exactly.
inline std::vector<double> solve_spd(const SparseSymMatrix& A, const std::vector<double>& b,
                                     const LinearSolveConfig& cfg = {},
                                     const std::vector<double>* x0 = nullptr) {
    const int n = A.n;
    if (static_cast<int>(b.size()) != n) throw std::invalid_argument("solve_spd: size mismatch");
    if (!(cfg.rel_tol > 0.0)) throw std::invalid_argument("solve_spd: rel_tol must be positive");
    if (x0 && static_cast<int>(x0->size()) != n) throw std::invalid_argument("solve_spd: x0 size mismatch");

    auto nrm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    double bn = nrm(b);
    if (n == 0 || bn == 0.0) return x;
    for (int i = 0; i < n; ++i)
        if (!(A.diag[static_cast<std::size_t>(i)] > 0.0))
            throw NotSpdError("solve_spd: nonpositive diagonal entry");
    if (x0) x = *x0;

    const int max_iter = cfg.max_iter > 0 ? cfg.max_iter : 10 * n;
    std::vector<double> r(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n)),
        p(static_cast<std::size_t>(n)), Ap(static_cast<std::size_t>(n));
    A.multiply(x, r);
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)];

    auto precondition = [&] {
        for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)] / A.diag[static_cast<std::size_t>(i)];
    };
    precondition();
    p = z;
    double rz = 0.0;
    for (int i = 0; i < n; ++i) rz += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];

    double rn = nrm(r);
    for (int it = 0; it < max_iter && rn > cfg.rel_tol * bn; ++it) {
        A.multiply(p, Ap);
        double pAp = 0.0;
        for (int i = 0; i < n; ++i) pAp += p[static_cast<std::size_t>(i)] * Ap[static_cast<std::size_t>(i)];
        if (!(pAp > 0.0)) throw NotSpdError("solve_spd: nonpositive curvature direction");
        double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * Ap[static_cast<std::size_t>(i)];
        }
        precondition();
        double rz_new = 0.0;
        for (int i = 0; i < n; ++i) rz_new += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
        rn = nrm(r);
    }
    if (!(rn <= cfg.rel_tol * bn))
        throw SolverFailure("solve_spd: did not converge within iteration budget", rn / bn);
    return x;
}

// Scatters a free-dof vector into a full CR function (boundary dofs 0).
inline CRFunction expand_free(const TriangleMesh& mesh, const FreeDofMap& dofs,
                              const std::vector<double>& x) {
    CRFunction u = make_cr_function(mesh);
    for (int i = 0; i < dofs.n_free; ++i)
        u.dof[static_cast<std::size_t>(dofs.edge_of_free[static_cast<std::size_t>(i)])] = x[static_cast<std::size_t>(i)];
    return u;
}

} // namespace plapeig
