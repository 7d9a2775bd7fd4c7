#pragma once

#include <cmath>
#include <vector>

#include "adapt/loss.hpp"
#include "adapt/model.hpp"

namespace adapt {

/// Loss value and its parameter gradients.
template <typename T>
struct Objective {
    T loss = T(0);
    Gradients<T> grads;
};

/// Mean cross-entropy of `model` on (x, y); rows labeled kIgnoreLabel
/// contribute nothing but count in the mean.
template <typename T>
Objective<T> supervised_objective(const Model<T>& model, const MatrixT<T>& x, const Labels& y) {
    ForwardCache<T> cache;
    const MatrixT<T> scores = forward_cached(model, x, Mode::eval, cache);
    auto lg = cross_entropy(scores, y);
    return {lg.loss, backward(model, cache, lg.grad)};
}

/// Supervised term plus `weight` times an unlabeled term; the two gradients
/// are computed by separate passes and summed. Weight 0 returns the
/// supervised objective untouched (no signed-zero drift).
template <typename T>
Objective<T> combine(Objective<T> labeled, const Objective<T>& unlabeled, T weight) {
    if (weight == T(0)) return labeled;
    labeled.loss += weight * unlabeled.loss;
    labeled.grads.add_scaled(unlabeled.grads, weight);
    return labeled;
}

/// Cross-entropy against fixed pseudo-labels (kIgnoreLabel rows excluded);
/// used for pseudo-label, mean-teacher and FixMatch consistency terms.
template <typename T>
Objective<T> pseudo_label_objective(const Model<T>& model, const MatrixT<T>& x, const Labels& pseudo) {
    return supervised_objective(model, x, pseudo);
}

/// Rows whose normalized entropy H / ln(n_classes) is at most `threshold`.
template <typename T>
std::vector<char> low_entropy_mask(const MatrixT<T>& scores, double threshold) {
    const VectorT<T> h = softmax_entropy(scores);
    const double log_n = std::log(static_cast<double>(std::max<Eigen::Index>(scores.cols(), 2)));
    std::vector<char> mask(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index r = 0; r < scores.rows(); ++r)
        mask[static_cast<std::size_t>(r)] = static_cast<double>(h(r)) / log_n <= threshold;
    return mask;
}

/// Mean softmax entropy over the rows of `x` passing the normalized-entropy
/// threshold. The selection is treated as constant (no gradient).
template <typename T>
Objective<T> entropy_objective(const Model<T>& model, const MatrixT<T>& x, double threshold) {
    ForwardCache<T> cache;
    const MatrixT<T> scores = forward_cached(model, x, Mode::eval, cache);
    auto lg = entropy_loss(scores, low_entropy_mask(scores, threshold));
    return {lg.loss, backward(model, cache, lg.grad)};
}

/// FixMatch consistency: pseudo-labels from `labeler` on the weak view
/// (stop-gradient), cross-entropy of `model` on the strong view.
template <typename T>
Objective<T> fixmatch_objective(const Model<T>& model, const Model<T>& labeler, const MatrixT<T>& weak,
                                const MatrixT<T>& strong, double threshold) {
    const Labels pseudo = confident_labels(predict(labeler, weak), threshold);
    return pseudo_label_objective(model, strong, pseudo);
}

/// Mean-teacher consistency: pseudo-labels from the teacher on the clean
/// batch, cross-entropy of the student on the augmented batch.
template <typename T>
Objective<T> mean_teacher_objective(const Model<T>& student, const Model<T>& teacher, const MatrixT<T>& clean,
                                    const MatrixT<T>& augmented, double threshold) {
    const Labels pseudo = confident_labels(predict(teacher, clean), threshold);
    return pseudo_label_objective(student, augmented, pseudo);
}

}  // namespace adapt
