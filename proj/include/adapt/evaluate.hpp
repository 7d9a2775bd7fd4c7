#pragma once

#include "adapt/error.hpp"
#include "adapt/model.hpp"
#include "adapt/task.hpp"

namespace adapt {

/// Fraction of rows whose argmax score (lowest class id on ties) equals the
/// label.
inline double accuracy(const Model<float>& model, const Matrix& x, const Labels& y) {
    if (x.rows() == 0) throw DataError("evaluate: empty test set");
    if (y.size() != static_cast<std::size_t>(x.rows())) throw DataError("evaluate: label count does not match rows");
    const auto pred = argmax_rows(predict(model, x));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

inline double evaluate(const Model<float>& model, const TestSet& test) { return accuracy(model, test.features, test.labels); }

}  // namespace adapt
