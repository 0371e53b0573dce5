#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "plapeig/common.hpp"

namespace plapeig {

// Conventions used throughout:
//  - element vertices are stored counterclockwise (signed area > 0);
//  - local edge i of an element is the edge opposite local vertex i, i.e. it
//    connects vertices (i+1)%3 and (i+2)%3;
//  - refedge is the local index of the refinement edge (newest-vertex
//    bisection inserts the midpoint of that edge);
//  - edges are canonical (a < b) and numbered in lexicographic (a,b) order,
//    which makes dof numbering deterministic;
//  - an edge is boundary iff it has exactly one incident element.

struct Element {
    std::array<int, 3> v{-1, -1, -1};
    int refedge = 0;
};

struct Edge {
    int a = -1;
    int b = -1;
    std::array<int, 2> elem{-1, -1};
    bool boundary = false;
};

class TriangleMesh {
public:
    TriangleMesh() = default;

    static TriangleMesh from_raw(std::vector<Vec2> vertices, std::vector<Element> elements,
                                 int generation = 0) {
        TriangleMesh m;
        m.vertices_ = std::move(vertices);
        m.elements_ = std::move(elements);
        m.generation_ = generation;
        m.finalize();
        return m;
    }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Element>& elements() const { return elements_; }
    const std::vector<Edge>& edges() const { return edges_; }
    int generation() const { return generation_; }

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_elements() const { return static_cast<int>(elements_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_interior_edges() const { return num_interior_edges_; }

    // Edge id of local edge i of element t.
    int element_edge(int t, int i) const { return element_edges_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]; }
    const std::array<int, 3>& element_edges(int t) const { return element_edges_[static_cast<std::size_t>(t)]; }

    Vec2 element_vertex(int t, int i) const {
        return vertices_[static_cast<std::size_t>(elements_[static_cast<std::size_t>(t)].v[static_cast<std::size_t>(i)])];
    }
    double element_area(int t) const { return areas_[static_cast<std::size_t>(t)]; }
    bool vertex_on_boundary(int v) const { return boundary_vertex_[static_cast<std::size_t>(v)] != 0; }

    Vec2 edge_midpoint(int e) const {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        return 0.5 * (vertices_[static_cast<std::size_t>(ed.a)] + vertices_[static_cast<std::size_t>(ed.b)]);
    }
    double edge_length(int e) const {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        return norm(vertices_[static_cast<std::size_t>(ed.b)] - vertices_[static_cast<std::size_t>(ed.a)]);
    }

    double total_area() const {
        double s = 0.0;
        for (double a : areas_) s += a;
        return s;
    }

    // Barycentric coordinates of a point with respect to element t.
    Bary barycentric(int t, Vec2 p) const {
        Vec2 x0 = element_vertex(t, 0), x1 = element_vertex(t, 1), x2 = element_vertex(t, 2);
        double d = cross(x1 - x0, x2 - x0);
        double l1 = cross(p - x0, x2 - x0) / d;
        double l2 = cross(x1 - x0, p - x0) / d;
        return {1.0 - l1 - l2, l1, l2};
    }

    Vec2 point_from_bary(int t, const Bary& b) const {
        Vec2 x0 = element_vertex(t, 0), x1 = element_vertex(t, 1), x2 = element_vertex(t, 2);
        return b[0] * x0 + b[1] * x1 + b[2] * x2;
    }

private:
    friend TriangleMesh bisect(const TriangleMesh&, const std::vector<int>&);

    // Builds edges, areas and boundary flags; validates all mesh invariants.
    void finalize() {
        const int nv = num_vertices();
        const int ne = num_elements();
        if (nv < 3 || ne < 1) throw std::invalid_argument("mesh: too few vertices or elements");
        areas_.resize(static_cast<std::size_t>(ne));
        for (int t = 0; t < ne; ++t) {
            const Element& el = elements_[static_cast<std::size_t>(t)];
            for (int i = 0; i < 3; ++i) {
                int v = el.v[static_cast<std::size_t>(i)];
                if (v < 0 || v >= nv) throw std::invalid_argument("mesh: vertex index out of range");
            }
            if (el.refedge < 0 || el.refedge > 2) throw std::invalid_argument("mesh: refedge out of range");
            double a2 = cross(element_vertex(t, 1) - element_vertex(t, 0),
                              element_vertex(t, 2) - element_vertex(t, 0));
            if (!(a2 > 0.0)) throw std::invalid_argument("mesh: element not counterclockwise or degenerate");
            areas_[static_cast<std::size_t>(t)] = 0.5 * a2;
        }

        struct Rec {
            int a, b, elem, local;
            bool operator<(const Rec& o) const {
                if (a != o.a) return a < o.a;
                if (b != o.b) return b < o.b;
                return elem < o.elem;
            }
        };
        std::vector<Rec> recs;
        recs.reserve(static_cast<std::size_t>(3 * ne));
        for (int t = 0; t < ne; ++t) {
            const Element& el = elements_[static_cast<std::size_t>(t)];
            for (int i = 0; i < 3; ++i) {
                int va = el.v[static_cast<std::size_t>((i + 1) % 3)];
                int vb = el.v[static_cast<std::size_t>((i + 2) % 3)];
                recs.push_back({std::min(va, vb), std::max(va, vb), t, i});
            }
        }
        std::sort(recs.begin(), recs.end());

        edges_.clear();
        element_edges_.assign(static_cast<std::size_t>(ne), {-1, -1, -1});
        num_interior_edges_ = 0;
        for (std::size_t i = 0; i < recs.size();) {
            std::size_t j = i;
            while (j < recs.size() && recs[j].a == recs[i].a && recs[j].b == recs[i].b) ++j;
            std::size_t count = j - i;
            if (count > 2) throw std::invalid_argument("mesh: nonconforming (edge shared by >2 elements)");
            Edge e;
            e.a = recs[i].a;
            e.b = recs[i].b;
            e.elem[0] = recs[i].elem;
            e.elem[1] = count == 2 ? recs[i + 1].elem : -1;
            e.boundary = count == 1;
            int id = static_cast<int>(edges_.size());
            for (std::size_t k = i; k < j; ++k)
                element_edges_[static_cast<std::size_t>(recs[k].elem)][static_cast<std::size_t>(recs[k].local)] = id;
            edges_.push_back(e);
            if (!e.boundary) ++num_interior_edges_;
            i = j;
        }

        boundary_vertex_.assign(static_cast<std::size_t>(nv), 0);
        for (const Edge& e : edges_) {
            if (e.boundary) {
                boundary_vertex_[static_cast<std::size_t>(e.a)] = 1;
                boundary_vertex_[static_cast<std::size_t>(e.b)] = 1;
            }
        }
    }

    std::vector<Vec2> vertices_;
    std::vector<Element> elements_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> element_edges_;
    std::vector<double> areas_;
    std::vector<char> boundary_vertex_;
    int num_interior_edges_ = 0;
    int generation_ = 0;
};

// h_T = |T|^(1/2), the d-th root of the measure in d = 2.
inline double element_size(const TriangleMesh& mesh, int t) {
    return std::sqrt(mesh.element_area(t));
}

inline double face_size(const TriangleMesh& mesh, int f) { return mesh.edge_length(f); }

inline double element_diam(const TriangleMesh& mesh, int t) {
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
        Vec2 a = mesh.element_vertex(t, (i + 1) % 3);
        Vec2 b = mesh.element_vertex(t, (i + 2) % 3);
        d = std::max(d, norm(b - a));
    }
    return d;
}

inline double max_element_diam(const TriangleMesh& mesh) {
    double d = 0.0;
    for (int t = 0; t < mesh.num_elements(); ++t) d = std::max(d, element_diam(mesh, t));
    return d;
}

// Uniform n x n grid on the unit square, each cell split along the
// bottom-left to top-right diagonal; the diagonal is the refinement edge.
inline TriangleMesh make_unit_square_mesh(int n) {
    if (n < 1) throw std::invalid_argument("make_unit_square_mesh: n must be >= 1");
    std::vector<Vec2> verts;
    verts.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            verts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<Element> elems;
    elems.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            // Hypotenuse (v00, v11) is local edge 1 resp. 2.
            elems.push_back({{v00, v10, v11}, 1});
            elems.push_back({{v00, v11, v01}, 2});
        }
    }
    return TriangleMesh::from_raw(std::move(verts), std::move(elems));
}

// L-shaped domain (0,2)^2 minus the closed top-right unit square. n counts
// grid cells across the full width 2 and must be even so that the reentrant
// corner (1,1) is a grid vertex; each unit block is meshed like
// make_unit_square_mesh(n/2).
inline TriangleMesh make_lshape_mesh(int n) {
    if (n < 1) throw std::invalid_argument("make_lshape_mesh: n must be >= 1");
    if (n % 2 != 0) throw std::invalid_argument("make_lshape_mesh: n must be even");
    const int half = n / 2;
    std::vector<Vec2> verts;
    std::vector<int> vid(static_cast<std::size_t>((n + 1) * (n + 1)), -1);
    auto grid = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            if (i > half && j > half) continue; // inside the removed square
            vid[static_cast<std::size_t>(grid(i, j))] = static_cast<int>(verts.size());
            verts.push_back({2.0 * i / n, 2.0 * j / n});
        }
    }
    std::vector<Element> elems;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (i >= half && j >= half) continue; // cell in the removed square
            int v00 = vid[static_cast<std::size_t>(grid(i, j))];
            int v10 = vid[static_cast<std::size_t>(grid(i + 1, j))];
            int v01 = vid[static_cast<std::size_t>(grid(i, j + 1))];
            int v11 = vid[static_cast<std::size_t>(grid(i + 1, j + 1))];
            elems.push_back({{v00, v10, v11}, 1});
            elems.push_back({{v00, v11, v01}, 2});
        }
    }
    return TriangleMesh::from_raw(std::move(verts), std::move(elems));
}

// Newest-vertex bisection of all marked elements plus conforming closure.
// The input mesh is untouched; the result keeps the input vertices as a
// prefix (refinement only appends edge midpoints). Empty marking returns an
// identical copy.
inline TriangleMesh bisect(const TriangleMesh& mesh, const std::vector<int>& marked) {
    for (int t : marked)
        if (t < 0 || t >= mesh.num_elements())
            throw std::invalid_argument("bisect: marked element out of range");
    if (marked.empty()) return mesh;

    std::vector<Vec2> verts = mesh.vertices();
    std::vector<Element> elems = mesh.elements();
    std::vector<char> alive(elems.size(), 1);
    // nb[t][i]: element across local edge i, -1 on the boundary. Kept exact
    // for alive elements during the whole round.
    std::vector<std::array<int, 3>> nb(elems.size());
    for (int t = 0; t < mesh.num_elements(); ++t) {
        for (int i = 0; i < 3; ++i) {
            const Edge& e = mesh.edges()[static_cast<std::size_t>(mesh.element_edge(t, i))];
            nb[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
                e.elem[0] == t ? e.elem[1] : e.elem[0];
        }
    }

    auto repoint = [&](int old_elem, int from, int to) {
        if (old_elem < 0) return;
        for (int i = 0; i < 3; ++i) {
            if (nb[static_cast<std::size_t>(old_elem)][static_cast<std::size_t>(i)] == from) {
                nb[static_cast<std::size_t>(old_elem)][static_cast<std::size_t>(i)] = to;
                return;
            }
        }
        throw std::logic_error("bisect: neighbor back-pointer not found");
    };

    // Bisects t (and its compatible partner n across the refinement edge, if
    // any). Preserves counterclockwise orientation; children tag the old legs
    // as their refinement edges, per newest-vertex bisection.
    auto split_pair = [&](int t, int n) {
        const Element et = elems[static_cast<std::size_t>(t)];
        const int r = et.refedge;
        const int P = et.v[static_cast<std::size_t>(r)];
        const int A = et.v[static_cast<std::size_t>((r + 1) % 3)];
        const int B = et.v[static_cast<std::size_t>((r + 2) % 3)];
        const int M = static_cast<int>(verts.size());
        verts.push_back(0.5 * (verts[static_cast<std::size_t>(A)] + verts[static_cast<std::size_t>(B)]));

        const int c1 = static_cast<int>(elems.size());
        const int c2 = c1 + 1;
        const int d1 = n >= 0 ? c2 + 1 : -1;
        const int d2 = n >= 0 ? c2 + 2 : -1;

        const int nb_PA = nb[static_cast<std::size_t>(t)][static_cast<std::size_t>((r + 2) % 3)];
        const int nb_BP = nb[static_cast<std::size_t>(t)][static_cast<std::size_t>((r + 1) % 3)];
        elems.push_back({{P, A, M}, 2});
        elems.push_back({{P, M, B}, 1});
        alive.push_back(1);
        alive.push_back(1);
        nb.push_back({d2, c2, nb_PA}); // c1 edges: (A,M), (M,P), (P,A)
        nb.push_back({d1, nb_BP, c1}); // c2 edges: (M,B), (B,P), (P,M)
        alive[static_cast<std::size_t>(t)] = 0;
        repoint(nb_PA, t, c1);
        repoint(nb_BP, t, c2);

        if (n >= 0) {
            const Element en = elems[static_cast<std::size_t>(n)];
            const int s = en.refedge;
            const int Q = en.v[static_cast<std::size_t>(s)];
            const int nb_QB = nb[static_cast<std::size_t>(n)][static_cast<std::size_t>((s + 2) % 3)];
            const int nb_AQ = nb[static_cast<std::size_t>(n)][static_cast<std::size_t>((s + 1) % 3)];
            elems.push_back({{Q, B, M}, 2});
            elems.push_back({{Q, M, A}, 1});
            alive.push_back(1);
            alive.push_back(1);
            nb.push_back({c2, d2, nb_QB}); // d1 edges: (B,M), (M,Q), (Q,B)
            nb.push_back({c1, nb_AQ, d1}); // d2 edges: (M,A), (A,Q), (Q,M)
            alive[static_cast<std::size_t>(n)] = 0;
            repoint(nb_QB, n, d1);
            repoint(nb_AQ, n, d2);
        }
    };

    const std::size_t work_cap =
        100 * (elems.size() + marked.size()) + 10000; // closure terminates well below this
    std::size_t work = 0;
    std::vector<int> stack;
    for (int seed : marked) {
        if (!alive[static_cast<std::size_t>(seed)]) continue; // already bisected during closure
        stack.assign(1, seed);
        while (!stack.empty()) {
            if (++work > work_cap) throw std::logic_error("bisect: refinement closure did not terminate");
            int x = stack.back();
            if (!alive[static_cast<std::size_t>(x)]) {
                stack.pop_back();
                continue;
            }
            int n = nb[static_cast<std::size_t>(x)][static_cast<std::size_t>(elems[static_cast<std::size_t>(x)].refedge)];
            if (n < 0) {
                split_pair(x, -1);
                stack.pop_back();
                continue;
            }
            // Compatible iff the shared edge is also n's refinement edge.
            int j = -1;
            for (int i = 0; i < 3; ++i)
                if (nb[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)] == x) j = i;
            if (j < 0) throw std::logic_error("bisect: asymmetric neighbor structure");
            if (elems[static_cast<std::size_t>(n)].refedge == j) {
                split_pair(x, n);
                stack.pop_back();
            } else {
                stack.push_back(n);
            }
        }
    }

    std::vector<Element> out;
    out.reserve(elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i)
        if (alive[i]) out.push_back(elems[i]);
    return TriangleMesh::from_raw(std::move(verts), std::move(out), mesh.generation() + 1);
}

// --- plapmesh ASCII format ---------------------------------------------
// line 1:  plapmesh 1
// line 2:  <#vertices> <#elements>
// then one "x y" line per vertex and one "v0 v1 v2 refedge" per element.

inline void write_plapmesh(const TriangleMesh& mesh, std::ostream& os) {
    os << "plapmesh 1\n" << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
    os.precision(17);
    for (const Vec2& v : mesh.vertices()) os << v.x << ' ' << v.y << '\n';
    for (const Element& e : mesh.elements())
        os << e.v[0] << ' ' << e.v[1] << ' ' << e.v[2] << ' ' << e.refedge << '\n';
}

inline void write_plapmesh(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::invalid_argument("write_plapmesh: cannot open " + path);
    write_plapmesh(mesh, os);
    if (!os) throw std::runtime_error("write_plapmesh: write failed for " + path);
}

inline TriangleMesh read_plapmesh(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "plapmesh" || version != 1)
        throw std::invalid_argument("read_plapmesh: bad header (want 'plapmesh 1')");
    int nv = 0, ne = 0;
    if (!(is >> nv >> ne) || nv < 3 || ne < 1)
        throw std::invalid_argument("read_plapmesh: bad counts");
    std::vector<Vec2> verts(static_cast<std::size_t>(nv));
    for (Vec2& v : verts)
        if (!(is >> v.x >> v.y)) throw std::invalid_argument("read_plapmesh: truncated vertex list");
    std::vector<Element> elems(static_cast<std::size_t>(ne));
    for (Element& e : elems)
        if (!(is >> e.v[0] >> e.v[1] >> e.v[2] >> e.refedge))
            throw std::invalid_argument("read_plapmesh: truncated element list");
    // from_raw validates orientation, refedge range and conformity.
    return TriangleMesh::from_raw(std::move(verts), std::move(elems));
}

inline TriangleMesh read_plapmesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("read_plapmesh: cannot open " + path);
    return read_plapmesh(is);
}

// Bucket-grid point locator; used to transfer discrete functions between
// meshes (there is no parent tracking across bisection rounds).
class ElementLocator {
public:
    explicit ElementLocator(const TriangleMesh& mesh) : mesh_(&mesh) {
        lo_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
        hi_ = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
        for (const Vec2& v : mesh.vertices()) {
            lo_.x = std::min(lo_.x, v.x);
            lo_.y = std::min(lo_.y, v.y);
            hi_.x = std::max(hi_.x, v.x);
            hi_.y = std::max(hi_.y, v.y);
        }
        int target = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_elements()) / 2.0)));
        nx_ = ny_ = target;
        cells_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), {});
        for (int t = 0; t < mesh.num_elements(); ++t) {
            Vec2 tl = mesh.element_vertex(t, 0), th = tl;
            for (int i = 1; i < 3; ++i) {
                Vec2 v = mesh.element_vertex(t, i);
                tl.x = std::min(tl.x, v.x);
                tl.y = std::min(tl.y, v.y);
                th.x = std::max(th.x, v.x);
                th.y = std::max(th.y, v.y);
            }
            auto [i0, j0] = cell_of(tl);
            auto [i1, j1] = cell_of(th);
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i)
                    cells_[static_cast<std::size_t>(j * nx_ + i)].push_back(t);
        }
    }

    // Element containing p (barycentric tolerance tol), or -1.
    int locate(Vec2 p, double tol = 1e-12) const {
        auto [i, j] = cell_of(p);
        int hit = scan(cells_[static_cast<std::size_t>(j * nx_ + i)], p, tol);
        if (hit >= 0) return hit;
        // Robustness fallback: full scan with a looser tolerance.
        for (int t = 0; t < mesh_->num_elements(); ++t) {
            if (inside(t, p, 1e-9)) return t;
        }
        return -1;
    }

private:
    std::pair<int, int> cell_of(Vec2 p) const {
        double fx = (p.x - lo_.x) / std::max(hi_.x - lo_.x, 1e-300);
        double fy = (p.y - lo_.y) / std::max(hi_.y - lo_.y, 1e-300);
        int i = std::clamp(static_cast<int>(fx * nx_), 0, nx_ - 1);
        int j = std::clamp(static_cast<int>(fy * ny_), 0, ny_ - 1);
        return {i, j};
    }

    bool inside(int t, Vec2 p, double tol) const {
        Bary b = mesh_->barycentric(t, p);
        return b[0] >= -tol && b[1] >= -tol && b[2] >= -tol;
    }

    int scan(const std::vector<int>& cand, Vec2 p, double tol) const {
        for (int t : cand)
            if (inside(t, p, tol)) return t;
        return -1;
    }

    const TriangleMesh* mesh_;
    Vec2 lo_, hi_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> cells_;
};

} // namespace plapeig
