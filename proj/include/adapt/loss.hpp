#pragma once

#include <cmath>
#include <vector>

#include "adapt/tensor.hpp"

namespace adapt {

template <typename T>
struct LossGrad {
    T loss = T(0);
    MatrixT<T> grad;  // d loss / d scores
};

inline constexpr int kIgnoreLabel = -1;

/// Softmax cross-entropy summed over rows whose label is not kIgnoreLabel and
/// divided by the total row count (ignored rows still count in the
/// denominator, so masking never rescales the remaining terms).
template <typename T>
LossGrad<T> cross_entropy(const MatrixT<T>& scores, const Labels& labels) {
    LossGrad<T> out{T(0), MatrixT<T>::Zero(scores.rows(), scores.cols())};
    if (scores.rows() == 0) return out;
    const T inv_n = T(1) / static_cast<T>(scores.rows());
    const MatrixT<T> p = softmax_rows(scores);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y == kIgnoreLabel) continue;
        const T mx = scores.row(r).maxCoeff();
        const T lse = mx + std::log((scores.row(r).array() - mx).exp().sum());
        out.loss += (lse - scores(r, y)) * inv_n;
        out.grad.row(r) = p.row(r) * inv_n;
        out.grad(r, y) -= inv_n;
    }
    return out;
}

/// Shannon entropy (nats) of each row's softmax.
template <typename T>
VectorT<T> softmax_entropy(const MatrixT<T>& scores) {
    const MatrixT<T> p = softmax_rows(scores);
    VectorT<T> h(scores.rows());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        T acc = 0;
        for (Eigen::Index c = 0; c < scores.cols(); ++c)
            if (p(r, c) > T(0)) acc -= p(r, c) * std::log(p(r, c));
        h(r) = acc;
    }
    return h;
}

/// Mean softmax entropy over rows with include[r] set (denominator: all rows).
template <typename T>
LossGrad<T> entropy_loss(const MatrixT<T>& scores, const std::vector<char>& include) {
    LossGrad<T> out{T(0), MatrixT<T>::Zero(scores.rows(), scores.cols())};
    if (scores.rows() == 0) return out;
    const T inv_n = T(1) / static_cast<T>(scores.rows());
    const MatrixT<T> p = softmax_rows(scores);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        if (!include[static_cast<std::size_t>(r)]) continue;
        T h = 0;
        for (Eigen::Index c = 0; c < scores.cols(); ++c)
            if (p(r, c) > T(0)) h -= p(r, c) * std::log(p(r, c));
        out.loss += h * inv_n;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            const T pc = p(r, c);
            const T logp = pc > T(0) ? std::log(pc) : T(0);
            out.grad(r, c) = -pc * (logp + h) * inv_n;
        }
    }
    return out;
}

/// Rows whose maximum softmax probability reaches `threshold` get their
/// argmax as label; the rest get kIgnoreLabel.
template <typename T>
Labels confident_labels(const MatrixT<T>& scores, double threshold) {
    const MatrixT<T> p = softmax_rows(scores);
    const auto arg = argmax_rows(p);
    Labels out(static_cast<std::size_t>(scores.rows()), kIgnoreLabel);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        if (static_cast<double>(p(r, arg[i])) >= threshold) out[i] = arg[i];
    }
    return out;
}

}  // namespace adapt
