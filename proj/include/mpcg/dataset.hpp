#ifndef MPCG_DATASET_HPP
#define MPCG_DATASET_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "error.hpp"
#include "features.hpp"
#include "solver.hpp"
#include "sparse.hpp"

namespace mpcg {

using json = nlohmann::json;

inline constexpr int sample_format_version = 1;

// ---------------------------------------------------------------------------
// Graph families and matrix generation
// ---------------------------------------------------------------------------

enum class GraphFamily { path, cycle, grid2d, tree_random, star, random_regular, random_gnm };
enum class DiagonalStrategy { degree_plus_delta, uniform_constant };

NLOHMANN_JSON_SERIALIZE_ENUM(GraphFamily, {{GraphFamily::path, "path"},
                                           {GraphFamily::cycle, "cycle"},
                                           {GraphFamily::grid2d, "grid2d"},
                                           {GraphFamily::tree_random, "tree_random"},
                                           {GraphFamily::star, "star"},
                                           {GraphFamily::random_regular, "random_regular"},
                                           {GraphFamily::random_gnm, "random_gnm"}})

NLOHMANN_JSON_SERIALIZE_ENUM(DiagonalStrategy,
                             {{DiagonalStrategy::degree_plus_delta, "degree_plus_delta"},
                              {DiagonalStrategy::uniform_constant, "uniform_constant"}})

struct GraphSpec {
    GraphFamily family = GraphFamily::path;
    std::size_t n = 2;
    /// Undirected edge count for random_gnm.
    std::size_t m_target = 0;
    /// Vertex degree for random_regular.
    std::size_t degree = 3;
    /// Columns of a grid2d lattice; 0 picks the largest divisor of n not above sqrt(n).
    std::size_t grid_width = 0;
    DiagonalStrategy diagonal = DiagonalStrategy::degree_plus_delta;
    double delta_lo = 0.1;
    double delta_hi = 2.0;
    double constant = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GraphSpec, family, n, m_target, degree, grid_width,
                                                diagonal, delta_lo, delta_hi, constant, seed)

using Edge = std::pair<std::size_t, std::size_t>;

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::size_t auto_grid_width(std::size_t n) {
    std::size_t w = 1;
    for (std::size_t c = 1; c * c <= n; ++c)
        if (n % c == 0) w = c;
    return w;
}

inline std::uint64_t edge_key(std::size_t u, std::size_t v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

inline void check_spec(const GraphSpec& s) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
    if (s.n == 0 || s.n >= (std::size_t{1} << 31)) fail("n out of range");
    const std::size_t pairs = s.n * (s.n - 1) / 2;
    switch (s.family) {
    case GraphFamily::cycle:
        if (s.n < 3) fail("cycle needs n >= 3");
        break;
    case GraphFamily::grid2d:
        if (s.grid_width != 0 && s.n % s.grid_width != 0) fail("grid_width must divide n");
        break;
    case GraphFamily::random_regular:
        if (s.degree >= s.n) fail("degree must be below n");
        if ((s.degree * s.n) % 2 != 0) fail("degree * n must be even");
        break;
    case GraphFamily::random_gnm:
        if (s.m_target > pairs) fail("m_target exceeds n(n-1)/2");
        break;
    default:
        break;
    }
    if (s.diagonal == DiagonalStrategy::degree_plus_delta &&
        !(s.delta_lo > 0.0 && s.delta_lo <= s.delta_hi))
        fail("delta range must satisfy 0 < delta_lo <= delta_hi");
}

/// Uniformly random labelled tree decoded from a random Pruefer sequence.
inline std::vector<Edge> random_tree(std::size_t n, std::mt19937_64& rng) {
    std::vector<Edge> edges;
    if (n < 2) return edges;
    if (n == 2) return {{0, 1}};
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> code(n - 2);
    for (auto& c : code) c = pick(rng);
    std::vector<std::size_t> degree(n, 1);
    for (auto c : code) ++degree[c];
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> leaves;
    for (std::size_t v = 0; v < n; ++v)
        if (degree[v] == 1) leaves.push(v);
    for (auto c : code) {
        const std::size_t leaf = leaves.top();
        leaves.pop();
        edges.emplace_back(std::min(leaf, c), std::max(leaf, c));
        if (--degree[c] == 1) leaves.push(c);
    }
    const std::size_t u = leaves.top();
    leaves.pop();
    const std::size_t v = leaves.top();
    edges.emplace_back(std::min(u, v), std::max(u, v));
    return edges;
}

/// Random simple d-regular graph by incremental pairing of stubs, restarting
/// whenever no admissible pair remains.
inline std::vector<Edge> random_regular(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    if (d == 0) return {};
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<std::size_t> stubs;
        stubs.reserve(n * d);
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t k = 0; k < d; ++k) stubs.push_back(v);
        std::unordered_set<std::uint64_t> present;
        std::vector<Edge> edges;
        bool stuck = false;
        while (!stubs.empty() && !stuck) {
            bool paired = false;
            for (int tries = 0; tries < 100 && !paired; ++tries) {
                std::uniform_int_distribution<std::size_t> pick(0, stubs.size() - 1);
                const std::size_t i = pick(rng), j = pick(rng);
                const std::size_t u = stubs[i], v = stubs[j];
                if (i == j || u == v || present.count(edge_key(u, v))) continue;
                present.insert(edge_key(u, v));
                edges.emplace_back(std::min(u, v), std::max(u, v));
                for (std::size_t idx : {std::max(i, j), std::min(i, j)}) {
                    stubs[idx] = stubs.back();
                    stubs.pop_back();
                }
                paired = true;
            }
            stuck = !paired;
        }
        if (!stuck) return edges;
    }
    throw Error(ErrorCode::InvalidSpec, "could not realise a simple regular graph");
}

inline std::vector<Edge> build_edges(const GraphSpec& s, std::mt19937_64& rng) {
    std::vector<Edge> edges;
    const std::size_t n = s.n;
    switch (s.family) {
    case GraphFamily::path:
        for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        break;
    case GraphFamily::cycle:
        for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        edges.emplace_back(0, n - 1);
        break;
    case GraphFamily::grid2d: {
        const std::size_t w = s.grid_width ? s.grid_width : auto_grid_width(n);
        const std::size_t h = n / w;
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                const std::size_t v = r * w + c;
                if (c + 1 < w) edges.emplace_back(v, v + 1);
                if (r + 1 < h) edges.emplace_back(v, v + w);
            }
        break;
    }
    case GraphFamily::tree_random:
        edges = random_tree(n, rng);
        break;
    case GraphFamily::star:
        for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
        break;
    case GraphFamily::random_regular:
        edges = random_regular(n, s.degree, rng);
        break;
    case GraphFamily::random_gnm: {
        std::unordered_set<std::uint64_t> present;
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (edges.size() < s.m_target) {
            const std::size_t u = pick(rng), v = pick(rng);
            if (u == v || !present.insert(edge_key(u, v)).second) continue;
            edges.emplace_back(std::min(u, v), std::max(u, v));
        }
        break;
    }
    }
    return edges;
}

/// Unit off-diagonal weights on the given edges plus the supplied diagonal.
inline SparseSymMatrix assemble(std::size_t n, const std::vector<Edge>& edges,
                                const std::vector<double>& diagonal) {
    std::vector<Triplet> triplets;
    triplets.reserve(edges.size() + n);
    for (std::size_t i = 0; i < n; ++i) triplets.push_back({i, i, diagonal[i]});
    for (const auto& [u, v] : edges) triplets.push_back({u, v, 1.0});
    return from_coordinates<double>(triplets, n, Mirror::yes);
}

} // namespace detail

/**
 * Builds the matrix of a graph family: unit weights on every edge and a
 * diagonal that makes each row strictly dominant. Deterministic in spec.seed.
 */
inline SparseSymMatrix generate(const GraphSpec& spec) {
    detail::check_spec(spec);
    std::mt19937_64 rng(spec.seed);
    const auto edges = detail::build_edges(spec, rng);

    std::vector<std::size_t> degree(spec.n, 0);
    for (const auto& [u, v] : edges) {
        ++degree[u];
        ++degree[v];
    }
    std::vector<double> diagonal(spec.n);
    if (spec.diagonal == DiagonalStrategy::degree_plus_delta) {
        std::uniform_real_distribution<double> delta(spec.delta_lo, spec.delta_hi);
        for (std::size_t i = 0; i < spec.n; ++i)
            diagonal[i] = static_cast<double>(degree[i]) + delta(rng);
    } else {
        const std::size_t max_degree = *std::max_element(degree.begin(), degree.end());
        if (!(spec.constant > static_cast<double>(max_degree)))
            throw Error(ErrorCode::InvalidSpec, "constant diagonal " + std::to_string(spec.constant) +
                                                    " not above max degree " +
                                                    std::to_string(max_degree));
        std::fill(diagonal.begin(), diagonal.end(), spec.constant);
    }
    return detail::assemble(spec.n, edges, diagonal);
}

/// Undirected off-diagonal edges (u < v) of a matrix graph.
inline std::vector<Edge> edges_of(const SparseSymMatrix& a) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j : a.row_cols(i))
            if (j > i) edges.emplace_back(i, j);
    return edges;
}

/// Default perturbation size: 1% of the stored nonzeros, at least one edge.
inline std::size_t default_edges_to_add(const SparseSymMatrix& a) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.01 * a.nonzeros())));
}

namespace detail {

/// Shared driver: picks the added edges of each variant and lets `diagonal`
/// assign the new diagonal from (rng, new degrees, base degrees, base diagonal).
template <typename DiagonalRule>
std::vector<SparseSymMatrix> perturb_with(const SparseSymMatrix& base, std::size_t variants,
                                          std::size_t edges_to_add, std::uint64_t seed,
                                          DiagonalRule diagonal) {
    if (edges_to_add == 0) throw Error(ErrorCode::InvalidArgument, "edges_to_add must be >= 1");
    const std::size_t n = base.size();
    const auto base_edges = edges_of(base);
    const std::size_t pairs = n * (n - 1) / 2;
    if (pairs - base_edges.size() < edges_to_add)
        throw Error(ErrorCode::GraphFull, std::to_string(pairs - base_edges.size()) +
                                              " non-edges left, " + std::to_string(edges_to_add) +
                                              " requested");
    std::unordered_set<std::uint64_t> base_set;
    for (const auto& [u, v] : base_edges) base_set.insert(edge_key(u, v));
    std::vector<std::size_t> base_degree(n);
    for (std::size_t i = 0; i < n; ++i) base_degree[i] = base.degree(i);
    const auto base_diag = base.diagonal();

    std::vector<SparseSymMatrix> out;
    out.reserve(variants);
    for (std::size_t j = 0; j < variants; ++j) {
        std::mt19937_64 rng(mix_seed(seed ^ mix_seed(j + 1)));
        auto present = base_set;
        std::vector<Edge> added;
        const bool dense = (pairs - base_edges.size()) < 4 * edges_to_add;
        if (dense) {
            std::vector<Edge> candidates;
            for (std::size_t u = 0; u < n; ++u)
                for (std::size_t v = u + 1; v < n; ++v)
                    if (!present.count(edge_key(u, v))) candidates.emplace_back(u, v);
            std::shuffle(candidates.begin(), candidates.end(), rng);
            added.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(edges_to_add));
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            while (added.size() < edges_to_add) {
                const std::size_t u = pick(rng), v = pick(rng);
                if (u == v || !present.insert(edge_key(u, v)).second) continue;
                added.emplace_back(std::min(u, v), std::max(u, v));
            }
        }
        auto degree = base_degree;
        for (const auto& [u, v] : added) {
            ++degree[u];
            ++degree[v];
        }
        auto edges = base_edges;
        edges.insert(edges.end(), added.begin(), added.end());
        out.push_back(assemble(n, edges, diagonal(rng, degree, base_degree, base_diag)));
    }
    return out;
}

} // namespace detail

/**
 * Produces `variants` neighbours of a matrix, each with `edges_to_add` extra
 * random unit edges. Every row keeps its excess a_ii - deg(i), so strict
 * diagonal dominance carries over. Variant j draws from its own seed derived
 * from (seed, j).
 */
inline std::vector<SparseSymMatrix> perturb(const SparseSymMatrix& base, std::size_t variants,
                                            std::size_t edges_to_add, std::uint64_t seed) {
    return detail::perturb_with(base, variants, edges_to_add, seed,
                                [](std::mt19937_64&, const std::vector<std::size_t>& degree,
                                   const std::vector<std::size_t>& base_degree, const Vector<double>& base_diag) {
                                    auto diag = base_diag;
                                    for (std::size_t i = 0; i < diag.size(); ++i)
                                        diag[i] += static_cast<double>(degree[i] - base_degree[i]);
                                    return diag;
                                });
}

/**
 * Neighbours of generate(spec): the same edge additions as above, then the
 * spec's diagonal strategy is applied afresh to each variant (new delta draws,
 * or the constant, which must still exceed the largest degree).
 */
inline std::vector<SparseSymMatrix> perturb(const SparseSymMatrix& base, const GraphSpec& spec,
                                            std::size_t variants, std::size_t edges_to_add,
                                            std::uint64_t seed) {
    return detail::perturb_with(
        base, variants, edges_to_add, seed,
        [&spec](std::mt19937_64& rng, const std::vector<std::size_t>& degree, const std::vector<std::size_t>&,
                const Vector<double>&) {
            Vector<double> diag(degree.size());
            if (spec.diagonal == DiagonalStrategy::degree_plus_delta) {
                std::uniform_real_distribution<double> delta(spec.delta_lo, spec.delta_hi);
                for (std::size_t i = 0; i < diag.size(); ++i)
                    diag[i] = static_cast<double>(degree[i]) + delta(rng);
            } else {
                const auto max_degree = *std::max_element(degree.begin(), degree.end());
                if (!(spec.constant > static_cast<double>(max_degree)))
                    throw Error(ErrorCode::InvalidSpec, "constant diagonal no longer above max degree " +
                                                            std::to_string(max_degree));
                std::fill(diag.begin(), diag.end(), spec.constant);
            }
            return diag;
        });
}

// ---------------------------------------------------------------------------
// Labelling
// ---------------------------------------------------------------------------

struct EpsilonGrid {
    std::vector<double> values{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    double epsilon2 = 1e-10;
    double mu = 0.5;

    void validate() const {
        if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty epsilon grid");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid values must be positive");
            if (i > 0 && !(values[i] < values[i - 1]))
                throw Error(ErrorCode::InvalidArgument, "grid must be strictly descending");
        }
        if (!(epsilon2 > 0.0) || values.back() < epsilon2)
            throw Error(ErrorCode::InvalidArgument, "grid values must be >= epsilon2 > 0");
        if (!(mu > 0.0 && mu < 1.0)) throw Error(ErrorCode::InvalidArgument, "mu must lie in (0, 1)");
    }

    /// 1-based class index of a grid value; class i means values[i - 1].
    std::size_t class_of(double epsilon1) const {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] == epsilon1) return i + 1;
        throw Error(ErrorCode::InvalidArgument, "epsilon1 not on grid");
    }

    double epsilon_of(std::size_t label) const {
        if (label == 0 || label > values.size())
            throw Error(ErrorCode::InvalidArgument, "class " + std::to_string(label) + " not on grid");
        return values[label - 1];
    }

    friend bool operator==(const EpsilonGrid&, const EpsilonGrid&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EpsilonGrid, values, epsilon2, mu)

struct CostEntry {
    double epsilon1 = 0.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    double cost = 0.0;
    SolveStatus stage1_status = SolveStatus::converged;

    friend bool operator==(const CostEntry&, const CostEntry&) = default;
};

struct SampleRecord {
    std::string matrix_id;
    std::string group_id;
    json spec;
    FeatureVector features;
    /// One entry per grid value, in grid order.
    std::vector<CostEntry> costs;
    /// Pure binary64 run (N1 = 0); reported, never a class.
    CostEntry baseline;
    std::size_t label = 0;
    double i_opt = 0.0;
    double i_wrst = 0.0;
    bool valid = true;
    std::string error;

    /// Stored cost for a class; throws MissingCostEntry when absent.
    double cost_of(std::size_t label_index) const {
        if (label_index == 0 || label_index > costs.size())
            throw Error(ErrorCode::MissingCostEntry,
                        matrix_id + " has no cost for class " + std::to_string(label_index));
        return costs[label_index - 1].cost;
    }
};

/// Index of the cheapest entry; equal costs go to the larger epsilon1.
/// Independent of the order of entries.
inline std::size_t select_label(std::span<const CostEntry> costs) {
    if (costs.empty()) throw Error(ErrorCode::MissingCostEntry, "no costs to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < costs.size(); ++i) {
        const auto& c = costs[i];
        const auto& b = costs[best];
        if (c.cost < b.cost || (c.cost == b.cost && c.epsilon1 > b.epsilon1)) best = i;
    }
    return best;
}

/**
 * Sweeps the grid: one two-stage solve per epsilon1 plus a pure binary64
 * run. A failed solve marks the record invalid instead of throwing.
 */
inline SampleRecord label_matrix(const SparseSymMatrix& a, std::span<const double> b,
                                 const EpsilonGrid& grid, const SolveConfig& config = {}) {
    grid.validate();
    SampleRecord rec;
    rec.features = extract_features(a);
    try {
        for (double eps1 : grid.values) {
            const auto r = two_stage_solve(a, b, eps1, grid.epsilon2, grid.mu, config);
            rec.costs.push_back({eps1, r.n1, r.n2, r.cost, r.stage1_status});
        }
        const auto base = double_only_solve(a, b, grid.epsilon2, grid.mu, config);
        rec.baseline = {1.0, 0, base.n2, base.cost, SolveStatus::converged};
    } catch (const Error& e) {
        rec.valid = false;
        rec.error = e.what();
        return rec;
    }
    const std::size_t best = select_label(rec.costs);
    rec.label = best + 1;
    rec.i_opt = rec.costs[best].cost;
    rec.i_wrst = 0.0;
    for (const auto& c : rec.costs) rec.i_wrst = std::max(rec.i_wrst, c.cost);
    return rec;
}

/// b = A * 1, so the exact solution is the all-ones vector.
inline Vector<double> ones_rhs(const SparseSymMatrix& a) {
    const Vector<double> ones(a.size(), 1.0);
    return spmv(a, ones);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

NLOHMANN_JSON_SERIALIZE_ENUM(SolveStatus, {{SolveStatus::converged, "converged"},
                                           {SolveStatus::max_iterations, "max_iterations"},
                                           {SolveStatus::stagnated, "stagnated"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ResidualMode, {{ResidualMode::relative, "relative"},
                                            {ResidualMode::absolute, "absolute"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Preconditioner, {{Preconditioner::none, "none"},
                                              {Preconditioner::jacobi, "jacobi"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FeatureVector, n, m, pseudo_diameter, spread,
                                                lambda_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CostEntry, epsilon1, n1, n2, cost, stage1_status)

inline void to_json(json& j, const SampleRecord& r) {
    j = json{{"matrix_id", r.matrix_id}, {"group_id", r.group_id}, {"spec", r.spec},
             {"features", r.features},   {"costs", r.costs},       {"baseline", r.baseline},
             {"label", r.label},         {"i_opt", r.i_opt},       {"i_wrst", r.i_wrst},
             {"valid", r.valid}};
    if (!r.error.empty()) j["error"] = r.error;
}

inline void from_json(const json& j, SampleRecord& r) {
    j.at("matrix_id").get_to(r.matrix_id);
    j.at("group_id").get_to(r.group_id);
    r.spec = j.value("spec", json::object());
    j.at("features").get_to(r.features);
    j.at("costs").get_to(r.costs);
    r.baseline = j.value("baseline", CostEntry{});
    j.at("label").get_to(r.label);
    j.at("i_opt").get_to(r.i_opt);
    j.at("i_wrst").get_to(r.i_wrst);
    j.at("valid").get_to(r.valid);
    r.error = j.value("error", std::string{});
}

inline json solver_config_json(const SolveConfig& c) {
    json j{{"preconditioner", c.preconditioner},
           {"residual_mode", c.residual_mode},
           {"stagnation_window", c.stagnation_window},
           {"stagnation_factor", c.stagnation_factor}};
    j["max_iterations"] = c.max_iterations ? json(*c.max_iterations) : json("10n");
    return j;
}

/// Reads a sample file (one JSON record per line); blank lines are skipped.
inline std::vector<SampleRecord> read_sample(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<SampleRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(json::parse(line).get<SampleRecord>());
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Sample construction
// ---------------------------------------------------------------------------

/// One base matrix plus `variants` perturbed neighbours (0 for structured families).
struct GroupSpec {
    GraphSpec base;
    std::size_t variants = 0;
    /// 0 selects default_edges_to_add(base).
    std::size_t edges_to_add = 0;

    friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GroupSpec, base, variants, edges_to_add)

struct DatasetManifest {
    int format_version = sample_format_version;
    std::size_t group_count = 0;
    std::size_t record_count = 0;
    std::size_t valid_count = 0;
    std::size_t invalid_count = 0;
    std::size_t skipped_groups = 0;
    EpsilonGrid grid;
    json solver;
    std::vector<std::uint64_t> seeds;
    std::string sample_file;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetManifest, format_version, group_count,
                                                record_count, valid_count, invalid_count,
                                                skipped_groups, grid, solver, seeds, sample_file)

inline std::filesystem::path manifest_path_for(const std::filesystem::path& sample_path) {
    auto p = sample_path;
    p += ".manifest.json";
    return p;
}

inline std::string group_name(std::size_t g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "g%05zu", g);
    return buf;
}

/// Generates and labels every matrix of one group, in variant order.
inline std::vector<SampleRecord> label_group(const GroupSpec& group, std::size_t index,
                                             const EpsilonGrid& grid, const SolveConfig& config) {
    std::vector<SparseSymMatrix> matrices;
    matrices.push_back(generate(group.base));
    if (group.variants > 0) {
        const std::size_t extra =
            group.edges_to_add ? group.edges_to_add : default_edges_to_add(matrices.front());
        auto variants = perturb(matrices.front(), group.base, group.variants, extra, group.base.seed);
        for (auto& v : variants) matrices.push_back(std::move(v));
    }
    std::vector<SampleRecord> records;
    records.reserve(matrices.size());
    const std::string gid = group_name(index);
    for (std::size_t v = 0; v < matrices.size(); ++v) {
        const auto b = ones_rhs(matrices[v]);
        auto rec = label_matrix(matrices[v], b, grid, config);
        rec.matrix_id = gid + (v < 10 ? "-v0" : "-v") + std::to_string(v);
        rec.group_id = gid;
        rec.spec = json(group.base);
        rec.spec["variant"] = v;
        records.push_back(std::move(rec));
    }
    return records;
}

/**
 * Labels every group and writes the sample file (one JSON record per line,
 * in group order) and its manifest next to it. Groups are processed on
 * `threads` workers; results do not depend on the thread count.
 */
inline DatasetManifest build_sample(const std::vector<GroupSpec>& groups, const EpsilonGrid& grid,
                                    const std::filesystem::path& out_path,
                                    const SolveConfig& config = {}, std::size_t threads = 1) {
    grid.validate();
    config.validate();
    std::vector<std::optional<std::vector<SampleRecord>>> results(groups.size());
    std::vector<std::string> failures(groups.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t g = next++; g < groups.size(); g = next++) {
            try {
                results[g] = label_group(groups[g], g, grid, config);
            } catch (const Error& e) {
                failures[g] = e.what();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, groups.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    }

    std::ofstream out(out_path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + out_path.string() + " for writing");
    DatasetManifest manifest;
    manifest.grid = grid;
    manifest.solver = solver_config_json(config);
    manifest.sample_file = out_path.filename().string();
    manifest.group_count = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        manifest.seeds.push_back(groups[g].base.seed);
        if (!results[g]) {
            std::cerr << "skipping group " << group_name(g) << ": " << failures[g] << '\n';
            ++manifest.skipped_groups;
            continue;
        }
        for (const auto& rec : *results[g]) {
            if (!rec.valid)
                std::cerr << "invalid record " << rec.matrix_id << ": " << rec.error << '\n';
            out << json(rec).dump() << '\n';
            ++manifest.record_count;
            ++(rec.valid ? manifest.valid_count : manifest.invalid_count);
        }
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + out_path.string());

    std::ofstream mf(manifest_path_for(out_path));
    if (!mf) throw Error(ErrorCode::IoError, "cannot write manifest for " + out_path.string());
    mf << json(manifest).dump(2) << '\n';
    return manifest;
}

struct PlanOptions {
    std::size_t matrices = 500;
    std::size_t n_min = 200;
    std::size_t n_max = 1000;
    double structured_fraction = 0.27;
    std::size_t variants_per_group = 10;
    std::uint64_t seed = 1;
};

/**
 * Sample plan mixing structured families spread over the feature ranges with
 * random G(n, m) groups of one base and its perturbed neighbours. Produces
 * at least opts.matrices matrices.
 */
inline std::vector<GroupSpec> default_sample_plan(const PlanOptions& opts) {
    if (opts.n_min < 4 || opts.n_min > opts.n_max)
        throw Error(ErrorCode::InvalidArgument, "need 4 <= n_min <= n_max");
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick_n(opts.n_min, opts.n_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto next_seed = [&] { return detail::mix_seed(rng()); };

    const std::size_t group_size = opts.variants_per_group + 1;
    const auto random_target = static_cast<std::size_t>(
        std::llround((1.0 - opts.structured_fraction) * static_cast<double>(opts.matrices)));
    const std::size_t random_groups = (random_target + group_size - 1) / group_size;
    const std::size_t structured =
        opts.matrices > random_groups * group_size ? opts.matrices - random_groups * group_size : 0;

    static constexpr double delta_ranges[][2] = {{0.05, 0.5}, {0.1, 2.0}, {0.5, 4.0}, {1.0, 8.0}};
    static constexpr double path_constants[] = {2.02, 2.1, 2.5, 3.0, 4.0, 6.0};
    static constexpr GraphFamily structured_families[] = {
        GraphFamily::path, GraphFamily::cycle, GraphFamily::grid2d, GraphFamily::tree_random,
        GraphFamily::star, GraphFamily::random_regular};

    std::vector<GroupSpec> plan;
    for (std::size_t k = 0; k < structured; ++k) {
        GraphSpec s;
        s.family = structured_families[k % std::size(structured_families)];
        s.n = pick_n(rng);
        s.seed = next_seed();
        const bool constant = unit(rng) < 0.5;
        const auto& range = delta_ranges[rng() % std::size(delta_ranges)];
        s.delta_lo = range[0];
        s.delta_hi = range[1];
        switch (s.family) {
        case GraphFamily::path:
        case GraphFamily::cycle:
            if (constant) {
                s.diagonal = DiagonalStrategy::uniform_constant;
                s.constant = path_constants[rng() % std::size(path_constants)];
            }
            break;
        case GraphFamily::grid2d:
            if (constant) {
                s.diagonal = DiagonalStrategy::uniform_constant;
                s.constant = 2.0 * path_constants[rng() % std::size(path_constants)];
            }
            break;
        case GraphFamily::random_regular:
            s.degree = 3 + rng() % 6;
            if ((s.degree * s.n) % 2) ++s.n;
            if (constant) {
                s.diagonal = DiagonalStrategy::uniform_constant;
                s.constant = static_cast<double>(s.degree) + s.delta_lo + unit(rng) * (s.delta_hi - s.delta_lo);
            }
            break;
        default:
            break;
        }
        plan.push_back({s, 0, 0});
    }
    for (std::size_t g = 0; g < random_groups; ++g) {
        GraphSpec s;
        s.family = GraphFamily::random_gnm;
        s.n = pick_n(rng);
        const double avg_degree = 1.0 + 7.0 * unit(rng);
        s.m_target = static_cast<std::size_t>(std::llround(avg_degree * static_cast<double>(s.n) / 2.0));
        const auto& range = delta_ranges[rng() % std::size(delta_ranges)];
        s.delta_lo = range[0];
        s.delta_hi = range[1];
        s.seed = next_seed();
        plan.push_back({s, opts.variants_per_group, 0});
    }
    return plan;
}

} // namespace mpcg

#endif // MPCG_DATASET_HPP
