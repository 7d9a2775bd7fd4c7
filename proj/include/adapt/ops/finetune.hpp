#pragma once

#include "adapt/hparams.hpp"
#include "adapt/ops/objectives.hpp"
#include "adapt/ops/training.hpp"

namespace adapt {

/// Supervised finetuning of encoder and classifier on D_l. BatchNorm layers
/// run on their running statistics (TuneBN owns those), so zero learning
/// rates leave predictions unchanged.
inline Model<float> finetune(Model<float> model, const AdaptTask& task, const FinetuneHP& hp, Rng rng) {
    task.validate();
    check_operable(hp, "finetune");
    const auto n = static_cast<std::size_t>(task.labeled.rows());
    if (n < 1) throw DataError("finetune: empty labeled set");
    if (hp.reinitialize) reinitialize_head(model, task.n_way, rng.child(kStreamInit));
    check_head_matches(model, task, "finetune");

    Rng lrng = rng.child(kStreamLabeled);
    const OptimizerSpec spec = hp.optimizer_spec();
    auto state = OptimizerState<float>::for_model(model);
    const long long total = static_cast<long long>(hp.epochs) * static_cast<long long>(batches_per_epoch(n, hp.batch_size));
    long long step = 0;
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        for (const auto& idx : epoch_batches(n, hp.batch_size, lrng)) {
            const Matrix x = augment(gather_rows(task.labeled, idx), hp.aug, lrng);
            const auto obj = supervised_objective(model, x, gather_labels(task.labels, idx));
            if (!std::isfinite(obj.loss)) throw DivergenceError("finetune", epoch);
            ++step;
            optimizer_step(model, obj.grads, spec, state, step_schedule(step, total, hp.step));
        }
    }
    return model;
}

}  // namespace adapt
