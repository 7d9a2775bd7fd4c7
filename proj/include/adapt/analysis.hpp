#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "adapt/error.hpp"

namespace adapt {

struct RankProfile {
    std::string task_id;
    std::vector<double> ranks;  // 1 = best; ties share their average rank
};

/// Descending-accuracy ranks with average ties.
inline RankProfile rank_profile(const std::vector<double>& accuracies, std::string task_id = "") {
    if (accuracies.size() < 2) throw DataError("rank_profile: need at least 2 pipelines");
    for (std::size_t i = 0; i < accuracies.size(); ++i)
        if (!std::isfinite(accuracies[i])) throw DataError("rank_profile: accuracy " + std::to_string(i) + " is not finite");
    std::vector<std::size_t> order(accuracies.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return accuracies[a] > accuracies[b]; });
    RankProfile p{std::move(task_id), std::vector<double>(accuracies.size())};
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && accuracies[order[j + 1]] == accuracies[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) p.ranks[order[k]] = avg;
        i = j + 1;
    }
    return p;
}

/// Pearson correlation of two rank vectors.
inline double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("spearman_rho: vectors differ in length");
    if (a.size() < 2) throw DataError("spearman_rho: need at least 2 entries");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) throw DataError("spearman_rho: zero-variance rank vector");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// d = sqrt(1 - rho), in [0, sqrt 2].
inline double rank_distance(const std::vector<double>& a, const std::vector<double>& b) {
    return std::sqrt(std::max(0.0, 1.0 - spearman_rho(a, b)));
}

struct DistanceMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd d;

    void validate() const {
        if (d.rows() != d.cols()) throw DataError("distance matrix is not square");
        if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != d.rows())
            throw DataError("distance matrix has " + std::to_string(d.rows()) + " rows but " + std::to_string(ids.size()) + " ids");
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            if (d(i, i) != 0) throw DataError("distance matrix diagonal is not zero");
            for (Eigen::Index j = 0; j < d.cols(); ++j)
                if (!std::isfinite(d(i, j)) || d(i, j) < 0 || d(i, j) != d(j, i))
                    throw DataError("distance matrix entry (" + std::to_string(i) + ", " + std::to_string(j) + ") is invalid");
        }
    }
};

inline DistanceMatrix distance_matrix(const std::vector<RankProfile>& profiles) {
    const auto m = static_cast<Eigen::Index>(profiles.size());
    DistanceMatrix out{{}, Eigen::MatrixXd::Zero(m, m)};
    for (const auto& p : profiles) out.ids.push_back(p.task_id);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j)
            out.d(i, j) = out.d(j, i) =
                rank_distance(profiles[static_cast<std::size_t>(i)].ranks, profiles[static_cast<std::size_t>(j)].ranks);
    return out;
}

struct Embedding {
    Eigen::MatrixXd points;  // m x 2
    double stress = 0;       // Kruskal stress-1 of the planar distances
    std::vector<std::string> warnings;
};

/// Classical multidimensional scaling onto the top two eigenvectors of the
/// double-centered squared distances. Each axis is oriented so its largest
/// coordinate (first on ties) is positive, which makes the layout a function
/// of the matrix alone.
inline Embedding embed_2d(const DistanceMatrix& dm) {
    dm.validate();
    const Eigen::Index m = dm.d.rows();
    Embedding e{Eigen::MatrixXd::Zero(m, 2), 0, {}};
    if (m == 0) return e;
    if (dm.d.isZero(0)) {
        e.warnings.push_back("all distances are zero; every point placed at the origin");
        return e;
    }
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    const Eigen::MatrixXd b = -0.5 * j * dm.d.array().square().matrix() * j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    const auto& vals = solver.eigenvalues();  // ascending
    for (int axis = 0; axis < 2 && axis < m; ++axis) {
        const Eigen::Index k = m - 1 - axis;
        const double lambda = std::max(0.0, vals(k));
        Eigen::VectorXd v = solver.eigenvectors().col(k);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < m; ++i)
            if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
        if (v(arg) < 0) v = -v;
        e.points.col(axis) = v * std::sqrt(lambda);
    }
    double num = 0, den = 0;
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b2 = a + 1; b2 < m; ++b2) {
            const double planar = (e.points.row(a) - e.points.row(b2)).norm();
            num += (dm.d(a, b2) - planar) * (dm.d(a, b2) - planar);
            den += dm.d(a, b2) * dm.d(a, b2);
        }
    e.stress = den > 0 ? std::sqrt(num / den) : 0.0;
    return e;
}

// ---------------------------------------------------------------------------
// Cross-domain results

/// Accuracy of every pipeline (row) on every task (column).
struct ResultGrid {
    std::vector<std::string> pipelines;
    std::vector<std::string> tasks;
    std::vector<std::vector<std::optional<double>>> accuracy;  // [pipeline][task]

    ResultGrid() = default;
    ResultGrid(std::vector<std::string> p, std::vector<std::string> t)
        : pipelines(std::move(p)), tasks(std::move(t)),
          accuracy(pipelines.size(), std::vector<std::optional<double>>(tasks.size())) {}

    double at(std::size_t p, std::size_t t) const {
        const auto& v = accuracy.at(p).at(t);
        if (!v) throw DataError("missing result for (pipeline \"" + pipelines[p] + "\", task \"" + tasks[t] + "\")");
        return *v;
    }

    void validate() const {
        if (accuracy.size() != pipelines.size()) throw DataError("result grid: row count does not match pipelines");
        for (std::size_t p = 0; p < pipelines.size(); ++p) {
            if (accuracy[p].size() != tasks.size()) throw DataError("result grid: column count does not match tasks");
            for (std::size_t t = 0; t < tasks.size(); ++t) at(p, t);
        }
    }

    /// Row index of the best pipeline per task (lowest index on ties).
    std::vector<std::size_t> column_best() const {
        validate();
        std::vector<std::size_t> out;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            std::size_t best = 0;
            for (std::size_t p = 1; p < pipelines.size(); ++p)
                if (at(p, t) > at(best, t)) best = p;
            out.push_back(best);
        }
        return out;
    }
};

inline std::string grid_csv(const ResultGrid& g) {
    std::string out = "pipeline";
    for (const auto& t : g.tasks) out += "," + t;
    out += "\n";
    char buf[32];
    for (std::size_t p = 0; p < g.pipelines.size(); ++p) {
        out += g.pipelines[p];
        for (std::size_t t = 0; t < g.tasks.size(); ++t) {
            std::snprintf(buf, sizeof buf, "%.2f", 100.0 * g.at(p, t));
            out += std::string(",") + buf;
        }
        out += "\n";
    }
    return out;
}

struct SimilarityReport {
    ResultGrid grid;
    std::vector<RankProfile> profiles;
    DistanceMatrix distance;
    Embedding embedding;
};

/// Rank profile per task over the grid's pipelines, their pairwise rank
/// distances and a planar layout.
inline SimilarityReport similarity_report(const ResultGrid& grid) {
    grid.validate();
    SimilarityReport r;
    r.grid = grid;
    for (std::size_t t = 0; t < grid.tasks.size(); ++t) {
        std::vector<double> acc;
        for (std::size_t p = 0; p < grid.pipelines.size(); ++p) acc.push_back(grid.at(p, t));
        r.profiles.push_back(rank_profile(acc, grid.tasks[t]));
    }
    r.distance = distance_matrix(r.profiles);
    r.embedding = embed_2d(r.distance);
    return r;
}

inline constexpr std::string_view kAnalysisSchema = "map-analysis/1";

inline nlohmann::json analysis_to_json(const SimilarityReport& r, std::uint64_t seed) {
    using nlohmann::json;
    json matrix = json::array(), coords = json::array(), profiles = json::array();
    for (Eigen::Index i = 0; i < r.distance.d.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.distance.d.cols(); ++j) row.push_back(r.distance.d(i, j));
        matrix.push_back(std::move(row));
        coords.push_back({{"task", r.distance.ids[static_cast<std::size_t>(i)]},
                          {"x", r.embedding.points(i, 0)},
                          {"y", r.embedding.points(i, 1)}});
    }
    for (const auto& p : r.profiles) profiles.push_back({{"task", p.task_id}, {"ranks", p.ranks}});
    return {{"schema", std::string(kAnalysisSchema)},
            {"seed", seed},
            {"pipelines", r.grid.pipelines},
            {"tasks", r.grid.tasks},
            {"cells", r.grid.pipelines.size() * r.grid.tasks.size()},
            {"rank_profiles", std::move(profiles)},
            {"distance_matrix", std::move(matrix)},
            {"coordinates", std::move(coords)},
            {"stress", r.embedding.stress},
            {"warnings", r.embedding.warnings},
            {"cross_domain_csv", grid_csv(r.grid)}};
}

}  // namespace adapt
