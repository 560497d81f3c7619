#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <mpcg/dataset.hpp>
#include <mpcg/features.hpp>

#include "oracles.hpp"

using namespace mpcg;
using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

Edges path_edges(std::size_t n) {
    Edges e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return e;
}

SparseSymMatrix dense2(double a, double b, double c) {
    return from_coordinates<double>({{0, 0, a}, {0, 1, b}, {1, 0, b}, {1, 1, c}}, 2);
}

SparseSymMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_coordinates(t, n);
}

Edges random_graph_edges(std::size_t n, std::size_t m, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    Edges e;
    while (e.size() < m) {
        auto u = pick(rng), v = pick(rng);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (seen.insert({u, v}).second) e.emplace_back(u, v);
    }
    return e;
}

} // namespace

TEST(BfsFarthest, Path) {
    auto a = oracle::graph_matrix(path_edges(4), 4);
    EXPECT_EQ(bfs_farthest(a, 0), (FarthestVertex{3, 3}));
    EXPECT_EQ(bfs_farthest(a, 1), (FarthestVertex{3, 2}));
}

TEST(BfsFarthest, SingleVertex) {
    EXPECT_EQ(bfs_farthest(identity(1), 0), (FarthestVertex{0, 0}));
}

TEST(BfsFarthest, StarPicksSmallestLeaf) {
    Edges e{{3, 0}, {3, 1}, {3, 2}, {3, 4}};
    auto a = oracle::graph_matrix(e, 5);
    EXPECT_EQ(bfs_farthest(a, 3), (FarthestVertex{0, 1}));
    EXPECT_EQ(bfs_farthest(a, 0), (FarthestVertex{1, 2}));
}

TEST(BfsFarthest, StaysInComponent) {
    auto a = oracle::graph_matrix({{0, 1}, {2, 3}, {3, 4}}, 5);
    EXPECT_EQ(bfs_farthest(a, 0), (FarthestVertex{1, 1}));
    EXPECT_THROW(bfs_farthest(a, 5), Error);
}

TEST(PseudoDiameter, SmallGraphs) {
    EXPECT_EQ(pseudo_diameter(oracle::graph_matrix(path_edges(5), 5)), 4u);
    Edges cycle = path_edges(6);
    cycle.emplace_back(5, 0);
    auto c6 = oracle::graph_matrix(cycle, 6);
    EXPECT_EQ(oracle::all_pairs_diameter(oracle::adjacency(c6)), 3u);
    EXPECT_EQ(pseudo_diameter(c6), 3u);
    EXPECT_EQ(pseudo_diameter(identity(7)), 0u);
    EXPECT_EQ(pseudo_diameter(identity(1)), 0u);
}

TEST(PseudoDiameter, DisconnectedTakesLargestComponent) {
    Edges e = path_edges(3);         // diameter 2 on {0,1,2}
    for (std::size_t i = 3; i < 8; ++i) e.emplace_back(i, i + 1);  // path on 3..8, diameter 5
    auto a = oracle::graph_matrix(e, 10);                          // vertex 9 isolated
    EXPECT_EQ(pseudo_diameter(a), 5u);
}

TEST(PseudoDiameter, ExactOnRandomTrees) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        const auto edges = oracle::random_tree_edges(n, rng);
        auto a = oracle::graph_matrix(edges, n);
        EXPECT_EQ(pseudo_diameter(a), oracle::all_pairs_diameter(oracle::adjacency(edges, n))) << "n " << n;
    }
}

TEST(PseudoDiameter, LowerBoundOnRandomGraphs) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> size(2, 200);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        std::uniform_int_distribution<std::size_t> edges_count(0, std::min<std::size_t>(3 * n, n * (n - 1) / 2));
        const auto edges = random_graph_edges(n, edges_count(rng), rng);
        auto a = oracle::graph_matrix(edges, n);
        const auto l = pseudo_diameter(a);
        EXPECT_LE(l, oracle::all_pairs_diameter(oracle::adjacency(edges, n)));
        EXPECT_LE(l, n - 1);
    }
}

TEST(PseudoDiameter, RelabelingInvariance) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 60;
        const auto tree = oracle::random_tree_edges(n, rng);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Edges relabeled;
        for (auto [u, v] : tree) relabeled.emplace_back(perm[u], perm[v]);
        EXPECT_EQ(pseudo_diameter(oracle::graph_matrix(tree, n)),
                  pseudo_diameter(oracle::graph_matrix(relabeled, n)));

        // general graphs: both labelings respect the same true diameter
        const auto g = random_graph_edges(n, 90, rng);
        Edges gr;
        for (auto [u, v] : g) gr.emplace_back(perm[u], perm[v]);
        const auto d = oracle::all_pairs_diameter(oracle::adjacency(g, n));
        EXPECT_LE(pseudo_diameter(oracle::graph_matrix(g, n)), d);
        EXPECT_LE(pseudo_diameter(oracle::graph_matrix(gr, n)), d);
    }
}

TEST(Gershgorin, BasicExamples) {
    EXPECT_EQ(gershgorin_basic(identity(4)), (Interval{1, 1}));
    EXPECT_EQ(gershgorin_basic(dense2(2, 1, 2)), (Interval{1, 3}));
    auto d = from_coordinates<double>({{0, 0, 5}, {1, 1, 0.5}, {2, 2, 2}}, 3);
    EXPECT_EQ(gershgorin_basic(d), (Interval{0.5, 5}));
}

TEST(Gershgorin, ScaledExamples) {
    auto [s1, s2] = gershgorin_scaled(identity(3));
    EXPECT_EQ(s1, (Interval{1, 1}));
    EXPECT_EQ(s2, (Interval{1, 1}));

    std::tie(s1, s2) = gershgorin_scaled(dense2(2, 1, 2));
    EXPECT_EQ(s1, (Interval{1, 3}));
    EXPECT_EQ(s2, (Interval{1, 3}));

    auto a = dense2(4, 1, 1);
    std::tie(s1, s2) = gershgorin_scaled(a);
    EXPECT_EQ(s1, (Interval{-3, 5}));
    EXPECT_EQ(s2, (Interval{0, 8}));
    const double disc = std::sqrt(9.0 + 4.0);
    for (double lambda : {(5 - disc) / 2, (5 + disc) / 2}) {
        EXPECT_TRUE(s1.contains(lambda));
        EXPECT_TRUE(s2.contains(lambda));
    }
}

TEST(Gershgorin, ScaledRejectsNonpositiveDiagonal) {
    try {
        gershgorin_scaled(dense2(1, 0.5, -1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonpositiveDiagonal);
    }
}

TEST(Gershgorin, CombinedExamples) {
    EXPECT_EQ(eigen_estimates(identity(5)).combined, (Interval{1, 1}));
    const auto est = eigen_estimates(dense2(4, 1, 1));
    EXPECT_EQ(est.basic, (Interval{0, 5}));
    EXPECT_EQ(est.combined, (Interval{0, 5}));
}

TEST(Gershgorin, ContainmentProperty) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> size(1, 50);
    std::uniform_real_distribution<double> density(0.02, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        auto a = from_coordinates(oracle::random_spd_triplets(n, density(rng), rng), n);
        const auto est = eigen_estimates(a);
        EXPECT_TRUE(est.combined.within(est.basic));
        EXPECT_LE(est.combined.lo, est.combined.hi);
        for (double lambda : oracle::eigenvalues(a)) EXPECT_TRUE(est.combined.contains(lambda, 1e-9)) << lambda;
    }
}

TEST(Spread, Examples) {
    EXPECT_EQ(spread(Interval{1, 1}), 0.0);
    EXPECT_EQ(spread(Interval{1, 3}), 0.5);
    EXPECT_EQ(spread(Interval{0, 5}), 1.0);
    try {
        spread(Interval{-2, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateInterval);
    }
}

TEST(ExtractFeatures, Identity) {
    const auto f = extract_features(identity(4));
    EXPECT_EQ(f, (FeatureVector{4, 4, 0, 0.0, 1.0}));
}

TEST(ExtractFeatures, PathWithDiagonalThree) {
    std::vector<Triplet> t{{0, 0, 3}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}, {1, 2, 1}, {2, 1, 1}, {2, 2, 3}};
    auto a = from_coordinates(t, 3);
    const auto f = extract_features(a);
    EXPECT_EQ(f.n, 3u);
    EXPECT_EQ(f.m, 7u);
    EXPECT_EQ(f.pseudo_diameter, 2u);
    EXPECT_DOUBLE_EQ(f.spread, 4.0 / 6.0);
    EXPECT_EQ(f.lambda_max, 5.0);
    const auto ev = oracle::eigenvalues(a);
    EXPECT_NEAR(ev[0], 3 - std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(ev[1], 3.0, 1e-12);
    EXPECT_NEAR(ev[2], 3 + std::sqrt(2.0), 1e-12);
}

TEST(ExtractFeatures, GeneratedMatricesAgainstOracles) {
    for (auto family : {GraphFamily::path, GraphFamily::cycle, GraphFamily::grid2d, GraphFamily::tree_random,
                        GraphFamily::star, GraphFamily::random_regular, GraphFamily::random_gnm}) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            GraphSpec s;
            s.family = family;
            s.n = 120;
            s.m_target = 200;
            s.seed = seed;
            auto a = generate(s);
            const auto f = extract_features(a);
            const auto ev = oracle::eigenvalues(a);
            const auto est = eigen_estimates(a);
            EXPECT_LE(f.pseudo_diameter, oracle::all_pairs_diameter(oracle::adjacency(a)));
            EXPECT_GE(f.lambda_max, ev.maxCoeff() - 1e-9);
            EXPECT_LE(est.combined.lo, ev.minCoeff() + 1e-9);
            EXPECT_GE(f.m, f.n);
            EXPECT_GE(f.spread, 0.0);
            EXPECT_LT(f.spread, 1.0);
        }
    }
}

TEST(ExtractFeatures, ScaleInvariance) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 30;
        auto t = oracle::random_spd_triplets(n, 0.2, rng);
        const auto base = extract_features(from_coordinates(t, n));
        for (double c : {0.25, 2.0, 1024.0}) {
            auto scaled_t = t;
            for (auto& e : scaled_t) e.value *= c;
            const auto f = extract_features(from_coordinates(scaled_t, n));
            EXPECT_NEAR(f.spread, base.spread, 1e-12);
            EXPECT_NEAR(f.lambda_max, c * base.lambda_max, 1e-12 * c * base.lambda_max);
            EXPECT_EQ(f.pseudo_diameter, base.pseudo_diameter);
        }
    }
}

TEST(ExtractFeatures, WorkGrowsLinearly) {
    auto work_for = [](std::size_t n) {
        GraphSpec s;
        s.family = GraphFamily::random_gnm;
        s.n = n;
        s.m_target = 4 * n;
        s.seed = 17;
        auto a = generate(s);
        WorkCounter w;
        extract_features(a, &w);
        return static_cast<double>(w.steps) / static_cast<double>(a.size() + a.nonzeros());
    };
    const double small = work_for(1000);
    for (std::size_t n : {4000u, 16000u, 64000u}) {
        const double per_unit = work_for(n);
        EXPECT_LE(per_unit, 10.0);
        EXPECT_LE(per_unit, 1.5 * small);
    }
}
