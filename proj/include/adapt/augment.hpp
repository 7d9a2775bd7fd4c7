#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "adapt/error.hpp"
#include "adapt/rng.hpp"
#include "adapt/tensor.hpp"

namespace adapt {

/// Vector-space augmentation levels.
enum class Augmentation { norm, normal, weak1, weak2, strong1, strong2 };

inline constexpr std::array<std::string_view, 6> kAugmentationNames = {"norm",  "normal",  "weak1",
                                                                       "weak2", "strong1", "strong2"};

inline std::string to_string(Augmentation a) { return std::string(kAugmentationNames[static_cast<int>(a)]); }

inline std::optional<Augmentation> parse_augmentation(std::string_view s) {
    for (std::size_t i = 0; i < kAugmentationNames.size(); ++i)
        if (kAugmentationNames[i] == s) return static_cast<Augmentation>(i);
    return std::nullopt;
}

struct AugmentationLevel {
    double noise_sigma = 0;
    double dropout = 0;
    bool random_scale = false;  // per-entry multiplier in [0.8, 1.2]
};

inline AugmentationLevel augmentation_level(Augmentation a) {
    switch (a) {
        case Augmentation::norm: return {0.0, 0.0, false};
        case Augmentation::normal: return {0.01, 0.0, false};
        case Augmentation::weak1: return {0.05, 0.05, false};
        case Augmentation::weak2: return {0.1, 0.1, false};
        case Augmentation::strong1: return {0.2, 0.2, true};
        case Augmentation::strong2: return {0.3, 0.3, true};
    }
    throw ConfigError("aug", "unknown augmentation");
}

/// Per-feature standardization over the batch (population std). Features
/// with zero spread are only centered.
template <typename T>
MatrixT<T> standardize(const MatrixT<T>& batch) {
    if (batch.rows() == 0) return batch;
    MatrixT<T> out = batch;
    for (Eigen::Index c = 0; c < batch.cols(); ++c) {
        const T mean = batch.col(c).mean();
        const T var = (batch.col(c).array() - mean).square().mean();
        const T sd = std::sqrt(var);
        if (sd > T(0)) out.col(c) = (batch.col(c).array() - mean) / sd;
        else out.col(c).array() -= mean;
    }
    return out;
}

/// Augments every row. `norm` standardizes; the other levels perturb each
/// entry in row-major order: x <- x * s (strong levels, s ~ U[0.8, 1.2]),
/// then x <- x + N(0, sigma^2), then x <- 0 with the dropout probability.
/// Draws per entry: scale (strong only), noise (two uniforms), dropout
/// (one uniform, weak/strong only).
template <typename T>
MatrixT<T> augment(const MatrixT<T>& batch, Augmentation kind, Rng& rng) {
    if (kind == Augmentation::norm) return standardize(batch);
    const auto level = augmentation_level(kind);
    MatrixT<T> out = batch;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        double x = static_cast<double>(out.data()[i]);
        if (level.random_scale) x *= rng.uniform(0.8, 1.2);
        x += level.noise_sigma * rng.normal();
        if (level.dropout > 0 && rng.bernoulli(level.dropout)) x = 0.0;
        out.data()[i] = static_cast<T>(x);
    }
    return out;
}

}  // namespace adapt
