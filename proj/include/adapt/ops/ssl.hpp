#pragma once

#include <functional>
#include <optional>

#include "adapt/hparams.hpp"
#include "adapt/ops/objectives.hpp"
#include "adapt/ops/training.hpp"

namespace adapt {

/// `off` runs the supervised branch of an SSL operator alone: same labeled
/// stream, same schedule, no unlabeled term.
enum class UnlabeledTerm { on, off };

inline constexpr double kMeanTeacherDecay = 0.99;

using TeacherObserver = std::function<void(const Model<float>& student, const Model<float>& teacher)>;

namespace detail {

inline bool use_unlabeled(const AdaptTask& task, UnlabeledTerm term) {
    return term == UnlabeledTerm::on && task.unlabeled.rows() > 0;
}

inline void check_finite(float loss, const char* op, int epoch) {
    if (!std::isfinite(loss)) throw DivergenceError(op, epoch);
}

}  // namespace detail

/// Supervised training plus cross-entropy on confident pseudo-labels,
/// re-selected at the start of every epoch. Adam.
inline Model<float> ssl_pseudo_label(Model<float> model, const AdaptTask& task, const PseudoLabelHP& hp, Rng rng,
                                     UnlabeledTerm term = UnlabeledTerm::on) {
    task.validate();
    check_operable(hp, "ssl_pseudo_label");
    check_head_matches(model, task, "ssl_pseudo_label");
    const auto n = static_cast<std::size_t>(task.labeled.rows());
    const bool semi = detail::use_unlabeled(task, term);
    Rng lrng = rng.child(kStreamLabeled);
    Rng urng = rng.child(kStreamUnlabeled);
    const OptimizerSpec spec{OptimizerKind::adam, hp.lr, hp.lr, 0.0, 0.0};
    auto state = OptimizerState<float>::for_model(model);
    const auto w = static_cast<float>(hp.pseudo_weight);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        Labels pseudo;
        if (semi) pseudo = confident_labels(predict(model, task.unlabeled), hp.threshold);
        for (const auto& idx : epoch_batches(n, hp.batch_size, lrng)) {
            const Matrix xl = augment(gather_rows(task.labeled, idx), hp.aug_labeled, lrng);
            auto obj = supervised_objective(model, xl, gather_labels(task.labels, idx));
            if (semi) {
                const auto uidx = sample_with_replacement(static_cast<std::size_t>(task.unlabeled.rows()),
                                                          static_cast<std::size_t>(hp.batch_size), urng);
                const Matrix xu = augment(gather_rows(task.unlabeled, uidx), hp.aug_unlabeled, urng);
                obj = combine(std::move(obj), pseudo_label_objective(model, xu, gather_labels(pseudo, uidx)), w);
            }
            detail::check_finite(obj.loss, "ssl_pseudo_label", epoch);
            optimizer_step(model, obj.grads, spec, state);
        }
    }
    return model;
}

/// Supervised training plus mean entropy of low-entropy unlabeled
/// predictions. Adam.
inline Model<float> ssl_entropy(Model<float> model, const AdaptTask& task, const EntropyHP& hp, Rng rng,
                                UnlabeledTerm term = UnlabeledTerm::on) {
    task.validate();
    check_operable(hp, "ssl_entropy");
    check_head_matches(model, task, "ssl_entropy");
    const auto n = static_cast<std::size_t>(task.labeled.rows());
    const bool semi = detail::use_unlabeled(task, term);
    Rng lrng = rng.child(kStreamLabeled);
    Rng urng = rng.child(kStreamUnlabeled);
    const OptimizerSpec spec{OptimizerKind::adam, hp.lr, hp.lr, 0.0, 0.0};
    auto state = OptimizerState<float>::for_model(model);
    const auto w = static_cast<float>(hp.entropy_weight);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        for (const auto& idx : epoch_batches(n, hp.batch_size, lrng)) {
            auto obj = supervised_objective(model, gather_rows(task.labeled, idx), gather_labels(task.labels, idx));
            if (semi) {
                const auto uidx = sample_with_replacement(static_cast<std::size_t>(task.unlabeled.rows()),
                                                          static_cast<std::size_t>(hp.batch_size), urng);
                obj = combine(std::move(obj), entropy_objective(model, gather_rows(task.unlabeled, uidx), hp.threshold), w);
            }
            detail::check_finite(obj.loss, "ssl_entropy", epoch);
            optimizer_step(model, obj.grads, spec, state);
        }
    }
    return model;
}

/// Pseudo-labels from an exponential moving average of the student.
/// Returns the student; `observer` sees (student, teacher) after every step.
inline Model<float> ssl_mean_teacher(Model<float> model, const AdaptTask& task, const MeanTeacherHP& hp, Rng rng,
                                     UnlabeledTerm term = UnlabeledTerm::on, double ema_decay = kMeanTeacherDecay,
                                     const TeacherObserver& observer = {}) {
    task.validate();
    check_operable(hp, "ssl_mean_teacher");
    if (hp.reinitialize) reinitialize_head(model, task.n_way, rng.child(kStreamInit));
    check_head_matches(model, task, "ssl_mean_teacher");
    const auto n = static_cast<std::size_t>(task.labeled.rows());
    const bool semi = detail::use_unlabeled(task, term);
    Rng lrng = rng.child(kStreamLabeled);
    Rng urng = rng.child(kStreamUnlabeled);
    const OptimizerSpec spec = hp.optimizer_spec();
    auto state = OptimizerState<float>::for_model(model);
    Model<float> teacher = model;
    const auto w = static_cast<float>(hp.pseudo_weight);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        for (const auto& idx : epoch_batches(n, hp.batch_size, lrng)) {
            const Matrix xl = augment(gather_rows(task.labeled, idx), hp.aug_labeled, lrng);
            auto obj = supervised_objective(model, xl, gather_labels(task.labels, idx));
            if (semi) {
                const auto uidx = sample_with_replacement(static_cast<std::size_t>(task.unlabeled.rows()),
                                                          static_cast<std::size_t>(hp.batch_size), urng);
                const Matrix clean = gather_rows(task.unlabeled, uidx);
                const Matrix xu = augment(clean, hp.aug_unlabeled, urng);
                obj = combine(std::move(obj), mean_teacher_objective(model, teacher, clean, xu, hp.threshold), w);
            }
            detail::check_finite(obj.loss, "ssl_mean_teacher", epoch);
            optimizer_step(model, obj.grads, spec, state);
            ema_update(teacher, model, ema_decay);
            if (observer) observer(model, teacher);
        }
    }
    return model;
}

/// Labeled rows per FixMatch batch: max(1, round(batch / (1 + r))).
inline int fixmatch_labeled_count(int batch_size, int ratio) {
    if (ratio < 1 || ratio > 10) throw ConfigError("label_unlabeled_ratio", "ratio must be within 1:1..1:10");
    const auto l = static_cast<int>(std::lround(static_cast<double>(batch_size) / (1.0 + ratio)));
    return std::max(1, l);
}

/// FixMatch: pseudo-labels from weak1 views supervise strong1 views; the
/// labeler is the student or, with `teacher`, its moving average. Learning
/// rate follows warm-up-cosine over all steps; an epoch is
/// ceil(|D_l| / batch_size) steps.
inline Model<float> ssl_fixmatch(Model<float> model, const AdaptTask& task, const FixMatchHP& hp, Rng rng,
                                 UnlabeledTerm term = UnlabeledTerm::on) {
    task.validate();
    check_operable(hp, "ssl_fixmatch");
    const int labeled_rows = fixmatch_labeled_count(hp.batch_size, hp.label_unlabeled_ratio);
    const int unlabeled_rows = std::max(0, hp.batch_size - labeled_rows);
    if (hp.reinitialize) reinitialize_head(model, task.n_way, rng.child(kStreamInit));
    check_head_matches(model, task, "ssl_fixmatch");
    const auto n = static_cast<std::size_t>(task.labeled.rows());
    const bool semi = detail::use_unlabeled(task, term) && unlabeled_rows > 0;
    Rng lrng = rng.child(kStreamLabeled);
    Rng urng = rng.child(kStreamUnlabeled);
    const OptimizerSpec spec = hp.optimizer_spec();
    auto state = OptimizerState<float>::for_model(model);
    std::optional<Model<float>> teacher;
    if (hp.teacher) teacher = model;
    const auto w = static_cast<float>(hp.pseudo_weight);
    const auto per_epoch = static_cast<long long>(batches_per_epoch(n, hp.batch_size));
    const long long total = per_epoch * hp.epochs;
    long long step = 0;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        for (long long b = 0; b < per_epoch; ++b, ++step) {
            std::vector<std::size_t> idx;
            for (int i = 0; i < labeled_rows; ++i) {
                if (cursor == order.size()) {
                    order = lrng.permutation(n);
                    cursor = 0;
                }
                idx.push_back(order[cursor++]);
            }
            auto obj = supervised_objective(model, gather_rows(task.labeled, idx), gather_labels(task.labels, idx));
            if (semi) {
                const auto uidx = sample_with_replacement(static_cast<std::size_t>(task.unlabeled.rows()),
                                                          static_cast<std::size_t>(unlabeled_rows), urng);
                const Matrix raw = gather_rows(task.unlabeled, uidx);
                const Matrix weak = augment(raw, Augmentation::weak1, urng);
                const Matrix strong = augment(raw, Augmentation::strong1, urng);
                obj = combine(std::move(obj),
                              fixmatch_objective(model, teacher ? *teacher : model, weak, strong, hp.threshold), w);
            }
            detail::check_finite(obj.loss, "ssl_fixmatch", epoch);
            optimizer_step(model, obj.grads, spec, state, warmup_cosine(step, total));
            if (teacher) ema_update(*teacher, model, kMeanTeacherDecay);
        }
    }
    return model;
}

}  // namespace adapt
