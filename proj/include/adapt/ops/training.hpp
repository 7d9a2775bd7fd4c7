#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "adapt/augment.hpp"
#include "adapt/error.hpp"
#include "adapt/model.hpp"
#include "adapt/optimizer.hpp"
#include "adapt/rng.hpp"
#include "adapt/task.hpp"

namespace adapt {

/// Child indices of an operator's stream. Labeled and unlabeled draws use
/// separate streams so a supervised-only run consumes exactly the labeled
/// stream of the corresponding semi-supervised run.
enum StreamId : std::uint64_t { kStreamInit = 0, kStreamLabeled = 1, kStreamUnlabeled = 2 };

/// Replaces the head with a freshly initialized linear classifier.
inline void reinitialize_head(Model<float>& model, int n_way, Rng rng) {
    model.head = make_linear_head<float>(model.embed_width(), n_way, rng);
}

inline void check_head_matches(const Model<float>& model, const AdaptTask& task, const char* op) {
    if (model.input_width != task.width())
        throw ShapeError(std::string(op) + ": model input width " + std::to_string(model.input_width) +
                         " != task width " + std::to_string(task.width()));
    if (model.n_classes() != task.n_way)
        throw ShapeError(std::string(op) + ": model has " + std::to_string(model.n_classes()) +
                         " classes, task is " + std::to_string(task.n_way) + "-way");
}

/// Shuffled minibatches of [0, n) for one epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, Rng& rng) {
    const auto perm = rng.permutation(n);
    const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < n; i += bs)
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                         perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + bs)));
    return out;
}

inline std::size_t batches_per_epoch(std::size_t n, int batch_size) {
    const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
    return (n + bs - 1) / bs;
}

/// `count` indices drawn uniformly with replacement from [0, n).
inline std::vector<std::size_t> sample_with_replacement(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    return idx;
}

/// Learning-rate multiplier of the step schedule: 1 for steps 1..ceil(f*T),
/// 0.1 afterwards (steps counted from 1).
inline double step_schedule(long long step, long long total_steps, double fraction) {
    const auto boundary = static_cast<long long>(std::ceil(fraction * static_cast<double>(total_steps) - 1e-9));
    return step > boundary ? 0.1 : 1.0;
}

/// Warm-up-cosine multiplier for 0-based step s of T: linear ramp over the
/// first ceil(0.1 T) steps, then cosine decay reaching 0 at s = T - 1.
inline double warmup_cosine(long long step, long long total_steps) {
    const long long warm = std::max<long long>(1, static_cast<long long>(std::ceil(0.1 * static_cast<double>(total_steps))));
    if (step < warm) return static_cast<double>(step) / static_cast<double>(warm);
    const long long span = total_steps - 1 - warm;
    if (span <= 0) return 1.0;
    const double t = std::min(1.0, static_cast<double>(step - warm) / static_cast<double>(span));
    return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

/// teacher <- decay * teacher + (1 - decay) * student, tensor by tensor.
/// Entries already equal to the student's are left untouched.
inline void ema_update(Model<float>& teacher, const Model<float>& student, double decay) {
    auto tv = param_views(teacher);
    const auto sv = param_views(student);
    if (tv.size() != sv.size()) throw ShapeError("ema_update: model structures differ");
    const float d = static_cast<float>(decay);
    const float keep = 1.0f - d;
    for (std::size_t t = 0; t < tv.size(); ++t) {
        auto a = tv[t].values;
        const auto b = sv[t];
        if (a.size() != b.size()) throw ShapeError("ema_update: tensor size mismatch");
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i] != b[i]) a[i] = d * a[i] + keep * b[i];
    }
}

}  // namespace adapt
