#pragma once

#include <string>

#include "adapt/error.hpp"
#include "adapt/tensor.hpp"

namespace adapt {

/// One adaptation problem: labeled support D_l, unlabeled pool D_u.
struct AdaptTask {
    Matrix labeled;
    Labels labels;
    Matrix unlabeled;
    int n_way = 0;
    int k_shot = 0;

    Eigen::Index width() const { return labeled.cols(); }

    void validate() const {
        if (n_way < 1 || k_shot < 1) throw DataError("task: n_way and k_shot must be positive");
        if (labeled.rows() != static_cast<Eigen::Index>(n_way) * k_shot)
            throw DataError("task: labeled set has " + std::to_string(labeled.rows()) + " rows, expected " +
                            std::to_string(n_way * k_shot));
        if (labels.size() != static_cast<std::size_t>(labeled.rows()))
            throw DataError("task: label count does not match labeled rows");
        for (int y : labels)
            if (y < 0 || y >= n_way) throw DataError("task: label " + std::to_string(y) + " outside [0, n_way)");
        if (unlabeled.rows() > 0 && unlabeled.cols() != labeled.cols())
            throw DataError("task: unlabeled width differs from labeled width");
    }
};

/// Held-out labeled examples used only for scoring.
struct TestSet {
    Matrix features;
    Labels labels;
};

}  // namespace adapt
