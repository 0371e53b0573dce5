#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace plapeig {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2& operator+=(Vec2& a, Vec2 b) { a.x += b.x; a.y += b.y; return a; }
inline Vec2& operator-=(Vec2& a, Vec2 b) { a.x -= b.x; a.y -= b.y; return a; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Barycentric coordinates on a triangle, (l0, l1, l2) with sum 1.
using Bary = std::array<double, 3>;

// sign(t) * |t|^e; keeps |u|^(p-2) u well defined when an iterate dips
// slightly negative at fractional p.
inline double signed_pow(double t, double e) {
    if (t == 0.0) return 0.0;
    return t > 0.0 ? std::pow(t, e) : -std::pow(-t, e);
}

// Iterative linear solve could not reach the requested tolerance.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_residual(achieved) {}
    double achieved_residual;
};

// CG detected a direction of nonpositive curvature.
class NotSpdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An outer fixed-point iteration hit its budget before meeting its tolerance.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, double last_change)
        : std::runtime_error(what), last_rel_change(last_change) {}
    double last_rel_change;
};

// A discrete function was used with a mesh generation it does not belong to.
class StaleFunctionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Failure inside the adaptive loop, tagged with the level it happened at.
class AdaptiveLoopError : public std::runtime_error {
public:
    AdaptiveLoopError(int level_, const std::string& what)
        : std::runtime_error("level " + std::to_string(level_) + ": " + what), level(level_) {}
    int level;
};

// Splits [0, n) into contiguous chunks, one worker thread per chunk.
// Every chunk writes disjoint output slots, so results do not depend on the
// thread count; with threads <= 1 the body runs inline.
template <class Body>
void parallel_for(int n, int threads, const Body& body) {
    if (n <= 0) return;
    if (threads <= 1 || n < 2 * threads) {
        body(0, n);
        return;
    }
    int nchunks = threads;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nchunks));
    int chunk = (n + nchunks - 1) / nchunks;
    for (int c = 0; c < nchunks; ++c) {
        int begin = c * chunk;
        int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace plapeig
