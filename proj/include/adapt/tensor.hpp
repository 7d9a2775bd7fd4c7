#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adapt/error.hpp"

namespace adapt {

/// Row-major dense matrix; one example per row.
template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowVectorT = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Matrix = MatrixT<float>;
using Vector = VectorT<float>;

using Labels = std::vector<int>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

/// Rows `index` of `m`, in the given order.
template <typename T>
MatrixT<T> gather_rows(const MatrixT<T>& m, std::span<const std::size_t> index) {
    MatrixT<T> out(static_cast<Eigen::Index>(index.size()), m.cols());
    for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(index[i]));
    return out;
}

inline Labels gather_labels(const Labels& labels, std::span<const std::size_t> index) {
    Labels out;
    out.reserve(index.size());
    for (auto i : index) out.push_back(labels[i]);
    return out;
}

template <typename T>
MatrixT<T> vstack(const MatrixT<T>& a, const MatrixT<T>& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) throw ShapeError("vstack: column mismatch");
    MatrixT<T> out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

/// Index of the largest entry of each row; ties resolve to the lowest column.
template <typename T>
std::vector<int> argmax_rows(const MatrixT<T>& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < m.cols(); ++c)
            if (m(r, c) > m(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

template <typename T>
MatrixT<T> softmax_rows(const MatrixT<T>& scores) {
    MatrixT<T> p(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const T mx = scores.row(r).maxCoeff();
        T sum = 0;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            p(r, c) = std::exp(scores(r, c) - mx);
            sum += p(r, c);
        }
        p.row(r) /= sum;
    }
    return p;
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace adapt
