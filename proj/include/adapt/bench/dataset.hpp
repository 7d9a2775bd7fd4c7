#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adapt/error.hpp"
#include "adapt/rng.hpp"
#include "adapt/tensor.hpp"

namespace adapt {

struct EmbeddingDataset {
    Matrix features;
    Labels labels;
    std::vector<std::string> class_names;
    std::string domain_tag;

    int n_classes() const { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1; }

    void validate() const {
        if (static_cast<std::size_t>(features.rows()) != labels.size())
            throw DataError("dataset: " + std::to_string(features.rows()) + " rows but " + std::to_string(labels.size()) +
                            " labels");
        for (int y : labels)
            if (y < 0) throw DataError("dataset: negative label " + std::to_string(y));
        if (!class_names.empty() && static_cast<int>(class_names.size()) < n_classes())
            throw DataError("dataset: fewer class names than classes");
    }

    std::vector<std::vector<std::size_t>> rows_by_class() const {
        std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_classes()));
        for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
        return out;
    }
};

/// Target-domain transformation of the base layout:
/// x' = scale .* R(angle) x + noise, labels mapped through label_remap.
/// R rotates every consecutive feature pair (0,1), (2,3), ... by `rotation_angle`.
struct DomainShiftSpec {
    double rotation_angle = 0;
    std::vector<double> feature_scale;  // empty = all ones; otherwise one entry per feature
    double noise_sigma = 0;
    double class_prior_skew = 0;
    std::vector<int> label_remap;  // empty = identity
    std::uint64_t sample_seed = 0;  // selects the draw of base samples

    void validate(int n_classes, int dim) const {
        if (!std::isfinite(rotation_angle)) throw ConfigError("shift.rotation_angle", "must be finite");
        if (!feature_scale.empty()) {
            if (static_cast<int>(feature_scale.size()) != dim)
                throw ConfigError("shift.feature_scale", "expected " + std::to_string(dim) + " entries");
            for (double s : feature_scale)
                if (!(s > 0) || !std::isfinite(s)) throw ConfigError("shift.feature_scale", "entries must be positive");
        }
        if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) throw ConfigError("shift.noise_sigma", "must be >= 0");
        if (!(class_prior_skew >= 0) || !std::isfinite(class_prior_skew))
            throw ConfigError("shift.class_prior_skew", "must be >= 0");
        if (!label_remap.empty()) {
            if (static_cast<int>(label_remap.size()) != n_classes)
                throw ConfigError("shift.label_remap", "expected " + std::to_string(n_classes) + " entries");
            auto sorted = label_remap;
            std::sort(sorted.begin(), sorted.end());
            for (int c = 0; c < n_classes; ++c)
                if (sorted[static_cast<std::size_t>(c)] != c) throw ConfigError("shift.label_remap", "not a permutation");
        }
    }

    bool operator==(const DomainShiftSpec&) const = default;
};

/// Shared generative layout. A class c has latent mean mu_c ~ N(0, spread^2 I)
/// (drawn from its own stream, so class sets with different offsets are
/// disjoint); an example is x = tanh(z B) A with z = mu_c + within * N(0, I).
/// B and A are fixed by the base seed, so every domain and class set shares
/// one nonlinear feature map.
struct DomainLayout {
    int latent_dim = 16;
    double class_spread = 1.0;
    double within_sigma = 0.5;
    int per_class = 80;    // examples per class before prior skew
    int class_offset = 0;  // first class index of the generated class set
};

namespace detail {

inline int skewed_count(int per_class, double skew, int c, int n_classes) {
    if (skew == 0 || n_classes < 2) return per_class;
    const double rank = static_cast<double>(n_classes - 1 - c) / (n_classes - 1);
    return per_class + static_cast<int>(std::lround(per_class * skew * rank));
}

}  // namespace detail

/// Streams under the base seed: 0 the feature map, 1 class means (child c per
/// class), 2 + 2s base samples and 3 + 2s extra noise for s = sample_seed. The
/// identity spec reproduces the base domain exactly.
inline EmbeddingDataset gen_domain(std::uint64_t base_seed, int n_classes, int dim, const DomainShiftSpec& spec,
                                   const DomainLayout& layout = {}) {
    if (n_classes < 2) throw ConfigError("n_classes", "need at least 2 classes");
    if (dim < 2) throw ConfigError("dim", "need at least 2 features");
    if (layout.per_class < 1) throw ConfigError("layout.per_class", "must be positive");
    if (layout.latent_dim < 1) throw ConfigError("layout.latent_dim", "must be positive");
    if (layout.class_offset < 0) throw ConfigError("layout.class_offset", "must be non-negative");
    spec.validate(n_classes, dim);
    const int latent = layout.latent_dim;

    Rng map_rng(derive(base_seed, 0));
    Eigen::MatrixXd B(latent, dim), A(dim, dim);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = map_rng.normal() / std::sqrt(static_cast<double>(latent));
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = map_rng.normal() / std::sqrt(static_cast<double>(dim));

    Eigen::MatrixXd means(n_classes, latent);
    for (int c = 0; c < n_classes; ++c) {
        Rng r(derive(derive(base_seed, 1), static_cast<std::uint64_t>(c + layout.class_offset)));
        for (int j = 0; j < latent; ++j) means(c, j) = layout.class_spread * r.normal();
    }

    Rng sample_rng(derive(base_seed, 2 + 2 * spec.sample_seed));
    Rng noise_rng(derive(base_seed, 3 + 2 * spec.sample_seed));
    std::vector<int> counts;
    for (int c = 0; c < n_classes; ++c) counts.push_back(detail::skewed_count(layout.per_class, spec.class_prior_skew, c, n_classes));
    const int total = std::accumulate(counts.begin(), counts.end(), 0);

    EmbeddingDataset ds;
    ds.features.resize(total, dim);
    ds.labels.reserve(static_cast<std::size_t>(total));
    const double ca = std::cos(spec.rotation_angle), sa = std::sin(spec.rotation_angle);
    const bool rotate = spec.rotation_angle != 0;
    Eigen::RowVectorXd z(latent);
    Eigen::Index row = 0;
    for (int c = 0; c < n_classes; ++c) {
        for (int k = 0; k < counts[static_cast<std::size_t>(c)]; ++k, ++row) {
            for (int j = 0; j < latent; ++j) z(j) = means(c, j) + layout.within_sigma * sample_rng.normal();
            Eigen::RowVectorXd x = (z * B).array().tanh().matrix() * A;
            if (rotate)
                for (int j = 0; j + 1 < dim; j += 2) {
                    const double a = x(j), b = x(j + 1);
                    x(j) = ca * a - sa * b;
                    x(j + 1) = sa * a + ca * b;
                }
            for (int j = 0; j < dim; ++j) {
                double v = x(j);
                if (!spec.feature_scale.empty()) v *= spec.feature_scale[static_cast<std::size_t>(j)];
                if (spec.noise_sigma > 0) v += spec.noise_sigma * noise_rng.normal();
                ds.features(row, j) = static_cast<float>(v);
            }
            ds.labels.push_back(spec.label_remap.empty() ? c : spec.label_remap[static_cast<std::size_t>(c)]);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV: header "label,f0,f1,...", one example per line.

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::string format_float(float v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace detail

/// Rows are numbered from 1 counting the header, so the first example is row 2.
inline EmbeddingDataset parse_csv(const std::string& text, const std::string& source = "csv") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    const auto header = detail::split_csv(detail::trim(line));
    if (header.size() < 2 || detail::trim(header[0]) != "label")
        throw DataError(source + ": header must be \"label,f0,f1,...\"");
    std::vector<std::string> names;
    for (std::size_t j = 1; j < header.size(); ++j) {
        names.emplace_back(detail::trim(header[j]));
        if (names.back() != "f" + std::to_string(j - 1))
            throw DataError(source + ": header column " + std::to_string(j + 1) + " should be f" + std::to_string(j - 1));
    }
    const auto dim = static_cast<Eigen::Index>(names.size());
    std::vector<float> values;
    Labels labels;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv(detail::trim(line));
        const auto where = [&](const std::string& col) { return source + ": row " + std::to_string(row) + ", column " + col; };
        if (cells.size() != names.size() + 1)
            throw DataError(where("count") + ": expected " + std::to_string(names.size() + 1) + " fields, got " +
                            std::to_string(cells.size()));
        const auto lab = detail::trim(cells[0]);
        int y = -1;
        const auto lr = std::from_chars(lab.data(), lab.data() + lab.size(), y);
        if (lab.empty() || lr.ec != std::errc() || lr.ptr != lab.data() + lab.size() || y < 0)
            throw DataError(where("label") + ": expected a non-negative integer, got \"" + std::string(lab) + "\"");
        labels.push_back(y);
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto cell = detail::trim(cells[j + 1]);
            float v = 0;
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty()) throw DataError(where(names[j]) + ": missing value");
            if (r.ec != std::errc() || r.ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw DataError(where(names[j]) + ": expected a finite decimal, got \"" + std::string(cell) + "\"");
            values.push_back(v);
        }
    }
    EmbeddingDataset ds;
    ds.features.resize(static_cast<Eigen::Index>(labels.size()), dim);
    std::copy(values.begin(), values.end(), ds.features.data());
    ds.labels = std::move(labels);
    ds.domain_tag = source;
    return ds;
}

inline EmbeddingDataset ingest_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open dataset");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path);
}

/// Shortest round-trip decimal for every value.
inline std::string format_csv(const EmbeddingDataset& ds) {
    ds.validate();
    std::string out = "label";
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out += ",f" + std::to_string(j);
    out += "\n";
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
        out += std::to_string(ds.labels[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j) out += "," + detail::format_float(ds.features(i, j));
        out += "\n";
    }
    return out;
}

inline void export_csv(const EmbeddingDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << format_csv(ds);
}

}  // namespace adapt
