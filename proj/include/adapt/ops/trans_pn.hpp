#pragma once

#include <vector>

#include "adapt/hparams.hpp"
#include "adapt/model.hpp"
#include "adapt/task.hpp"

namespace adapt {

/// Per-class sums and counts of support embeddings.
struct ClassSums {
    Matrix sums;                // classes x embed
    std::vector<double> count;  // support examples per class
};

inline ClassSums class_sums(const Matrix& embeddings, const Labels& labels, int n_way) {
    ClassSums cs{Matrix::Zero(n_way, embeddings.cols()), std::vector<double>(static_cast<std::size_t>(n_way), 0.0)};
    for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        cs.sums.row(y) += embeddings.row(r);
        cs.count[static_cast<std::size_t>(y)] += 1.0;
    }
    for (int c = 0; c < n_way; ++c)
        if (cs.count[static_cast<std::size_t>(c)] == 0.0)
            throw DataError("trans_pn: class " + std::to_string(c) + " has no support example");
    return cs;
}

/// Scaled-cosine class probabilities of `embeddings` against `prototypes`.
inline Matrix prototype_probabilities(const Matrix& embeddings, const Matrix& prototypes, float tau) {
    Model<float> probe;
    probe.input_width = embeddings.cols();
    probe.head = PrototypeHead<float>{prototypes, tau};
    return softmax_rows(predict(probe, embeddings));
}

/// One transductive refinement round:
/// proto_c = (S_c + w * sum_u q_c(u) e_u) / (n_c + w * sum_u q_c(u)).
inline Matrix cipa_round(const ClassSums& support, const Matrix& unlabeled_embeddings, const Matrix& prototypes,
                         float tau, double weight) {
    const Matrix q = prototype_probabilities(unlabeled_embeddings, prototypes, tau);
    const Matrix weighted = q.transpose() * unlabeled_embeddings;  // classes x embed
    const Vector mass = q.colwise().sum().transpose();
    Matrix out(prototypes.rows(), prototypes.cols());
    const auto w = static_cast<float>(weight);
    for (Eigen::Index c = 0; c < out.rows(); ++c) {
        const float denom = static_cast<float>(support.count[static_cast<std::size_t>(c)]) + w * mass(c);
        out.row(c) = (support.sums.row(c) + w * weighted.row(c)) / denom;
    }
    return out;
}

/// Installs power scaling and a prototype head built from the support set,
/// optionally refined transductively on D_u.
inline Model<float> trans_pn(Model<float> model, const AdaptTask& task, const TransPNHP& hp) {
    task.validate();
    check_operable(hp, "trans_pn");
    if (model.input_width != task.width()) throw ShapeError("trans_pn: model input width does not match task");
    const auto p = static_cast<float>(hp.p);
    const auto tau = static_cast<float>(hp.tau);
    model.power_scale = PowerScale<float>{p};

    const Matrix support = power_scale(encode(model, task.labeled), p);
    const ClassSums sums = class_sums(support, task.labels, task.n_way);
    Matrix prototypes(task.n_way, support.cols());
    for (int c = 0; c < task.n_way; ++c)
        prototypes.row(c) = sums.sums.row(c) / static_cast<float>(sums.count[static_cast<std::size_t>(c)]);

    if (hp.cipa_switch && task.unlabeled.rows() > 0) {
        const Matrix unlabeled = power_scale(encode(model, task.unlabeled), p);
        for (int round = 0; round < hp.cipa_rounds; ++round)
            prototypes = cipa_round(sums, unlabeled, prototypes, tau, hp.cipa_unlabeled_weight);
    }
    model.head = PrototypeHead<float>{std::move(prototypes), tau};
    return model;
}

}  // namespace adapt
