#ifndef MPCG_REGRESSION_HPP
#define MPCG_REGRESSION_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"

namespace mpcg {

inline constexpr std::size_t feature_count = 5;
using NormalizedFeatures = std::array<double, feature_count>;

struct NormalizationParams {
    NormalizedFeatures min{};
    NormalizedFeatures max{};
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NormalizationParams, min, max)

inline NormalizationParams minimax_fit(std::span<const FeatureVector> train) {
    if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training vectors");
    NormalizationParams p;
    p.min = p.max = train.front().as_array();
    for (const auto& f : train) {
        const auto v = f.as_array();
        for (std::size_t k = 0; k < feature_count; ++k) {
            p.min[k] = std::min(p.min[k], v[k]);
            p.max[k] = std::max(p.max[k], v[k]);
        }
    }
    return p;
}

/// Maps onto [0,1]^5; constant features map to 0.5, out-of-range values clamp.
inline NormalizedFeatures minimax_apply(const NormalizationParams& p, const FeatureVector& f) {
    const auto v = f.as_array();
    NormalizedFeatures out{};
    for (std::size_t k = 0; k < feature_count; ++k) {
        const double width = p.max[k] - p.min[k];
        out[k] = width > 0.0 ? std::clamp((v[k] - p.min[k]) / width, 0.0, 1.0) : 0.5;
    }
    return out;
}

// ---------------------------------------------------------------------------

enum class SplitMode { group, record };

NLOHMANN_JSON_SERIALIZE_ENUM(SplitMode, {{SplitMode::group, "group"}, {SplitMode::record, "record"}})

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/**
 * Random train/test partition of record indices, deterministic in seed.
 *
 * In group mode whole groups move together; the test side receives
 * round(test_fraction * units) units, clamped to [1, units - 1].
 */
inline Split split(const std::vector<SampleRecord>& sample, double test_fraction,
                   std::uint64_t seed, SplitMode mode = SplitMode::group) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");

    std::vector<std::vector<std::size_t>> units;
    if (mode == SplitMode::group) {
        std::map<std::string, std::size_t> index_of;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            auto [it, inserted] = index_of.try_emplace(sample[i].group_id, units.size());
            if (inserted) units.emplace_back();
            units[it->second].push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < sample.size(); ++i) units.push_back({i});
    }
    if (units.size() < 2)
        throw Error(ErrorCode::SampleTooSmall, std::to_string(units.size()) + " split units");

    auto test_units = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(units.size())));
    test_units = std::clamp<std::size_t>(test_units, 1, units.size() - 1);

    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    Split s;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& side = k < test_units ? s.test : s.train;
        side.insert(side.end(), units[order[k]].begin(), units[order[k]].end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------------------

struct KnnPoint {
    NormalizedFeatures x{};
    std::size_t label = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(KnnPoint, x, label)

struct KnnModel {
    NormalizationParams normalization;
    std::vector<KnnPoint> points;
    std::size_t k = 5;
    EpsilonGrid grid;

    void validate() const {
        if (k == 0 || k > points.size())
            throw Error(ErrorCode::InvalidArgument, "k = " + std::to_string(k) + " with " +
                                                        std::to_string(points.size()) +
                                                        " training points");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(KnnModel, normalization, points, k, grid)

/// Fits normalization on the valid training records and stores them normalized.
inline KnnModel fit_knn(const std::vector<SampleRecord>& train, std::size_t k,
                        const EpsilonGrid& grid) {
    std::vector<FeatureVector> feats;
    std::vector<std::size_t> labels;
    for (const auto& r : train) {
        if (!r.valid) continue;
        feats.push_back(r.features);
        labels.push_back(r.label);
    }
    KnnModel model;
    model.normalization = minimax_fit(feats);
    model.k = k;
    model.grid = grid;
    for (std::size_t i = 0; i < feats.size(); ++i)
        model.points.push_back({minimax_apply(model.normalization, feats[i]), labels[i]});
    model.validate();
    return model;
}

/**
 * Majority vote over the k nearest training points (Euclidean, normalized
 * space). Equal distances keep training order; vote ties go to the smaller
 * class index, i.e. the larger epsilon1.
 */
inline std::size_t knn_predict(const KnnModel& model, const FeatureVector& query) {
    model.validate();
    const auto q = minimax_apply(model.normalization, query);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(model.points.size());
    for (std::size_t i = 0; i < model.points.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < feature_count; ++c) {
            const double t = model.points[i].x[c] - q[c];
            d2 += t * t;
        }
        dist.emplace_back(d2, i);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k), dist.end());

    std::map<std::size_t, std::size_t> votes;
    for (std::size_t j = 0; j < model.k; ++j) ++votes[model.points[dist[j].second].label];
    std::size_t best = 0, best_votes = 0;
    for (const auto& [label, count] : votes)
        if (count > best_votes) {
            best = label;
            best_votes = count;
        }
    return best;
}

// ---------------------------------------------------------------------------

struct EvalRow {
    std::string matrix_id;
    std::size_t label = 0;
    std::size_t predicted = 0;
    double i_opt = 0.0;
    double i_knn = 0.0;
    double i_wrst = 0.0;
    double i_double = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalRow, matrix_id, label, predicted, i_opt, i_knn,
                                                i_wrst, i_double)

struct EvalReport {
    std::vector<EvalRow> rows;
    double n_opt = 0.0;
    double n_knn = 0.0;
    double n_wrst = 0.0;
    /// Total of the pure binary64 runs, for reference.
    double n_double = 0.0;
    double ratio_opt_wrst = 0.0;
    double ratio_knn_wrst = 0.0;
    double knn_minus_opt = 0.0;
    double wrst_minus_knn = 0.0;
    std::size_t exact_predictions = 0;
    /// confusion[true - 1][predicted - 1]
    std::vector<std::vector<std::size_t>> confusion;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalReport, rows, n_opt, n_knn, n_wrst, n_double,
                                                ratio_opt_wrst, ratio_knn_wrst, knn_minus_opt,
                                                wrst_minus_knn, exact_predictions, confusion)

/// Scores predictions using the costs already stored in each record; no solves.
inline EvalReport evaluate(const KnnModel& model, const std::vector<SampleRecord>& test) {
    const std::size_t classes = model.grid.values.size();
    EvalReport rep;
    rep.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    for (const auto& rec : test) {
        if (!rec.valid) continue;
        if (rec.costs.size() != classes)
            throw Error(ErrorCode::MissingCostEntry,
                        rec.matrix_id + " has " + std::to_string(rec.costs.size()) + " costs, grid has " +
                            std::to_string(classes));
        EvalRow row;
        row.matrix_id = rec.matrix_id;
        row.label = rec.label;
        row.predicted = knn_predict(model, rec.features);
        row.i_opt = rec.i_opt;
        row.i_knn = rec.cost_of(row.predicted);
        row.i_wrst = rec.i_wrst;
        row.i_double = rec.baseline.cost;
        if (!(row.i_opt <= row.i_knn && row.i_knn <= row.i_wrst))
            throw std::logic_error("cost ordering violated for " + rec.matrix_id);
        rep.n_opt += row.i_opt;
        rep.n_knn += row.i_knn;
        rep.n_wrst += row.i_wrst;
        rep.n_double += row.i_double;
        rep.exact_predictions += (row.label == row.predicted);
        ++rep.confusion[row.label - 1][row.predicted - 1];
        rep.rows.push_back(std::move(row));
    }
    if (rep.n_wrst > 0.0) {
        rep.ratio_opt_wrst = rep.n_opt / rep.n_wrst;
        rep.ratio_knn_wrst = rep.n_knn / rep.n_wrst;
    }
    rep.knn_minus_opt = rep.n_knn - rep.n_opt;
    rep.wrst_minus_knn = rep.n_wrst - rep.n_knn;
    if (!(rep.n_opt <= rep.n_knn && rep.n_knn <= rep.n_wrst))
        throw std::logic_error("total cost ordering violated");
    return rep;
}

/// Human-readable summary with ratios to four decimals.
inline std::string format_report(const EvalReport& rep, const EpsilonGrid& grid) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "test matrices        %zu\n", rep.rows.size());
    os << line;
    std::snprintf(line, sizeof line, "exact predictions    %zu\n", rep.exact_predictions);
    os << line;
    std::snprintf(line, sizeof line, "N_Opt                %.1f\n", rep.n_opt);
    os << line;
    std::snprintf(line, sizeof line, "N_kNN                %.1f\n", rep.n_knn);
    os << line;
    std::snprintf(line, sizeof line, "N_Wrst               %.1f\n", rep.n_wrst);
    os << line;
    std::snprintf(line, sizeof line, "N_double             %.1f\n", rep.n_double);
    os << line;
    std::snprintf(line, sizeof line, "N_Opt/N_Wrst         %.4f\n", rep.ratio_opt_wrst);
    os << line;
    std::snprintf(line, sizeof line, "N_kNN/N_Wrst         %.4f\n", rep.ratio_knn_wrst);
    os << line;
    std::snprintf(line, sizeof line, "N_kNN - N_Opt        %.1f\n", rep.knn_minus_opt);
    os << line;
    std::snprintf(line, sizeof line, "N_Wrst - N_kNN       %.1f\n", rep.wrst_minus_knn);
    os << line;

    os << "\nconfusion (rows: optimal class, columns: predicted)\n";
    os << "        ";
    for (std::size_t c = 0; c < grid.values.size(); ++c) {
        std::snprintf(line, sizeof line, "%7.0e", grid.values[c]);
        os << line;
    }
    os << '\n';
    for (std::size_t r = 0; r < rep.confusion.size(); ++r) {
        std::snprintf(line, sizeof line, "%7.0e ", grid.values[r]);
        os << line;
        for (std::size_t c = 0; c < rep.confusion[r].size(); ++c) {
            std::snprintf(line, sizeof line, "%7zu", rep.confusion[r][c]);
            os << line;
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
    int format_version = sample_format_version;
    KnnModel model;
    SplitMode split_mode = SplitMode::group;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    std::string sample_file;
    std::vector<std::string> test_ids;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelFile, format_version, model, split_mode,
                                                test_fraction, seed, sample_file, test_ids)

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
}

} // namespace mpcg

#endif // MPCG_REGRESSION_HPP
