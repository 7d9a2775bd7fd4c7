#pragma once

#include "adapt/hparams.hpp"
#include "adapt/ops/training.hpp"

namespace adapt {

/// Re-estimates BatchNorm running statistics on random unlabeled batches
/// (drawn with replacement). Weights stay frozen.
inline Model<float> tune_bn(Model<float> model, const AdaptTask& task, const TuneBNHP& hp, Rng rng) {
    check_operable(hp, "tune_bn");
    if (!model.has_batch_norm()) return model;
    if (task.unlabeled.rows() == 0) throw DataError("tune_bn: unlabeled pool is empty");
    if (task.unlabeled.cols() != model.input_width) throw ShapeError("tune_bn: unlabeled width does not match model");
    for (auto& layer : model.encoder)
        if (layer.bn) layer.bn->momentum = static_cast<float>(hp.momentum_entry);
    const auto n = static_cast<std::size_t>(task.unlabeled.rows());
    for (int it = 0; it < hp.iterations; ++it) {
        const auto idx = sample_with_replacement(n, static_cast<std::size_t>(std::max(1, hp.batch_size)), rng);
        forward(model, gather_rows(task.unlabeled, idx), Mode::train);
    }
    return model;
}

}  // namespace adapt
