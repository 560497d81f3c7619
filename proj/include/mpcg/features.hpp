#ifndef MPCG_FEATURES_HPP
#define MPCG_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "error.hpp"
#include "sparse.hpp"

namespace mpcg {

/// Counts adjacency entries and vertices touched, for checking linear cost.
struct WorkCounter {
    std::size_t steps = 0;
};

struct FeatureVector {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t pseudo_diameter = 0;
    double spread = 0.0;
    double lambda_max = 0.0;

    std::array<double, 5> as_array() const {
        return {static_cast<double>(n), static_cast<double>(m),
                static_cast<double>(pseudo_diameter), spread, lambda_max};
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    bool within(const Interval& outer) const { return lo >= outer.lo && hi <= outer.hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct EigenIntervalEstimate {
    Interval basic;
    Interval scaled1;
    Interval scaled2;
    Interval combined;
};

struct FarthestVertex {
    std::size_t vertex = 0;
    std::size_t distance = 0;

    friend bool operator==(const FarthestVertex&, const FarthestVertex&) = default;
};

namespace detail {

inline constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();

/// BFS over the off-diagonal graph. dist must hold `unvisited` for every
/// vertex of start's component; visited vertices are appended to order in
/// BFS order. The caller resets dist afterwards using order.
template <Scalar T>
FarthestVertex bfs(const CsrMatrix<T>& a, std::size_t start, std::vector<std::size_t>& dist,
                   std::vector<std::size_t>& order, WorkCounter* work) {
    const std::size_t first = order.size();
    dist[start] = 0;
    order.push_back(start);
    for (std::size_t head = first; head < order.size(); ++head) {
        const std::size_t u = order[head];
        const auto cols = a.row_cols(u);
        if (work) work->steps += cols.size() + 1;
        for (std::size_t v : cols) {
            if (v == u || dist[v] != unvisited) continue;
            dist[v] = dist[u] + 1;
            order.push_back(v);
        }
    }
    FarthestVertex best{start, 0};
    for (std::size_t k = first; k < order.size(); ++k) {
        const std::size_t v = order[k];
        if (dist[v] > best.distance || (dist[v] == best.distance && v < best.vertex))
            best = {v, dist[v]};
    }
    return best;
}

inline void reset(std::vector<std::size_t>& dist, std::vector<std::size_t>& order,
                  std::size_t from = 0) {
    for (std::size_t k = from; k < order.size(); ++k) dist[order[k]] = unvisited;
    order.resize(from);
}

} // namespace detail

/// Farthest vertex from start within its component (self-loops ignored);
/// among equally distant vertices the smallest index wins.
template <Scalar T>
FarthestVertex bfs_farthest(const CsrMatrix<T>& a, std::size_t start, WorkCounter* work = nullptr) {
    if (start >= a.size())
        throw Error(ErrorCode::IndexOutOfRange, "start vertex " + std::to_string(start));
    std::vector<std::size_t> dist(a.size(), detail::unvisited);
    std::vector<std::size_t> order;
    return detail::bfs(a, start, dist, order, work);
}

/**
 * Double-sweep BFS estimate of the graph diameter, a lower bound that is
 * exact on trees.
 *
 * Each connected component is swept separately, starting from its
 * minimum-degree vertex (smallest index on ties); the largest distance found
 * over all components is returned. Edgeless graphs give 0.
 */
template <Scalar T>
std::size_t pseudo_diameter(const CsrMatrix<T>& a, WorkCounter* work = nullptr) {
    const std::size_t n = a.size();
    std::vector<std::size_t> component(n, detail::unvisited);
    std::vector<std::size_t> dist(n, detail::unvisited);
    std::vector<std::size_t> order;
    order.reserve(n);
    std::size_t result = 0;

    for (std::size_t seed = 0; seed < n; ++seed) {
        if (component[seed] != detail::unvisited) continue;
        detail::bfs(a, seed, dist, order, work);
        std::size_t start = seed;
        for (std::size_t v : order) {
            component[v] = seed;
            if (a.degree(v) < a.degree(start) || (a.degree(v) == a.degree(start) && v < start))
                start = v;
        }
        detail::reset(dist, order);

        const auto u = detail::bfs(a, start, dist, order, work);
        detail::reset(dist, order);
        const auto v = detail::bfs(a, u.vertex, dist, order, work);
        detail::reset(dist, order);
        result = std::max(result, v.distance);
    }
    return result;
}

/// Hull of the Gershgorin discs: [min(a_ii - R_i), max(a_ii + R_i)].
template <Scalar T>
Interval gershgorin_basic(const CsrMatrix<T>& a, WorkCounter* work = nullptr) {
    Interval hull{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        if (work) work->steps += cols.size();
        double radius = 0.0;
        double center = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i)
                center = vals[k];
            else
                radius += std::abs(static_cast<double>(vals[k]));
        }
        hull.lo = std::min(hull.lo, center - radius);
        hull.hi = std::max(hull.hi, center + radius);
    }
    return hull;
}

/**
 * Gershgorin hulls of S^-1 A S for the two diagonal similarity scalings
 * S = diag(a_ii) and S = diag(1 / a_ii):
 *   first:  radius_i = (1/a_ii) * sum_{j!=i} a_jj |a_ij|
 *   second: radius_i = a_ii * sum_{j!=i} |a_ij| / a_jj
 */
template <Scalar T>
std::pair<Interval, Interval> gershgorin_scaled(const CsrMatrix<T>& a, WorkCounter* work = nullptr) {
    const auto diag = a.diagonal();
    for (std::size_t i = 0; i < diag.size(); ++i)
        if (!(diag[i] > T(0)))
            throw Error(ErrorCode::NonpositiveDiagonal, "a_ii <= 0 at row " + std::to_string(i));

    constexpr double inf = std::numeric_limits<double>::infinity();
    Interval first{inf, -inf};
    Interval second{inf, -inf};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        if (work) work->steps += cols.size();
        double weighted = 0.0;
        double inverse_weighted = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const std::size_t j = cols[k];
            if (j == i) continue;
            const double mag = std::abs(static_cast<double>(vals[k]));
            weighted += static_cast<double>(diag[j]) * mag;
            inverse_weighted += mag / static_cast<double>(diag[j]);
        }
        const double center = diag[i];
        const double r1 = weighted / center;
        const double r2 = center * inverse_weighted;
        first.lo = std::min(first.lo, center - r1);
        first.hi = std::max(first.hi, center + r1);
        second.lo = std::min(second.lo, center - r2);
        second.hi = std::max(second.hi, center + r2);
    }
    return {first, second};
}

/// The three hulls and their intersection.
template <Scalar T>
EigenIntervalEstimate eigen_estimates(const CsrMatrix<T>& a, WorkCounter* work = nullptr) {
    EigenIntervalEstimate est;
    est.basic = gershgorin_basic(a, work);
    std::tie(est.scaled1, est.scaled2) = gershgorin_scaled(a, work);
    est.combined = {std::max({est.basic.lo, est.scaled1.lo, est.scaled2.lo}),
                    std::min({est.basic.hi, est.scaled1.hi, est.scaled2.hi})};
    if (est.combined.lo > est.combined.hi)
        throw Error(ErrorCode::EmptyIntersection,
                    "[" + std::to_string(est.combined.lo) + ", " + std::to_string(est.combined.hi) +
                        "]");
    return est;
}

/// |hi - lo| / |hi + lo| of an eigenvalue interval.
inline double spread(const Interval& iv) {
    const double denom = std::abs(iv.hi + iv.lo);
    if (denom == 0.0) throw Error(ErrorCode::DegenerateInterval, "lambda_max + lambda_min = 0");
    return std::abs(iv.hi - iv.lo) / denom;
}

inline double spread(const EigenIntervalEstimate& est) { return spread(est.combined); }

/// (n, m, pseudo-diameter, spread, lambda_max estimate), all in O(n + m).
template <Scalar T>
FeatureVector extract_features(const CsrMatrix<T>& a, WorkCounter* work = nullptr) {
    const auto est = eigen_estimates(a, work);
    FeatureVector f;
    f.n = a.size();
    f.m = a.nonzeros();
    f.pseudo_diameter = pseudo_diameter(a, work);
    f.spread = spread(est);
    f.lambda_max = est.combined.hi;
    return f;
}

} // namespace mpcg

#endif // MPCG_FEATURES_HPP
