#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "adapt/error.hpp"
#include "adapt/model.hpp"

namespace adapt {

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::adam;
    double lr_classifier = 1e-2;
    double lr_embed = 1e-3;
    double momentum = 0.9;  // SGD velocity coefficient
    double decay = 0.0;     // decoupled weight decay
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Per-tensor moment buffers; bound to the parameter layout of the model it
/// was initialized for.
template <typename T>
struct OptimizerState {
    std::vector<std::vector<T>> first;   // SGD velocity / Adam m
    std::vector<std::vector<T>> second;  // Adam v
    long long steps = 0;
    bool initialized = false;

    static OptimizerState for_model(const Model<T>& model) {
        OptimizerState s;
        for (auto v : param_views(model)) {
            s.first.emplace_back(v.size(), T(0));
            s.second.emplace_back(v.size(), T(0));
        }
        s.initialized = true;
        return s;
    }
};

/// One update. `lr_scale` multiplies both learning rates (schedules).
/// Weight decay is decoupled: w -= lr * decay * w, applied with the value of
/// w before the gradient step.
template <typename T>
void optimizer_step(Model<T>& model, const Gradients<T>& grads, const OptimizerSpec& spec,
                    OptimizerState<T>& state, double lr_scale = 1.0) {
    if (!state.initialized) throw Error("optimizer_step: state not initialized");
    auto params = param_views(model);
    const auto gv = grad_views(grads);
    if (params.size() != state.first.size() || gv.size() != params.size())
        throw ShapeError("optimizer_step: parameter layout changed since state initialization");
    ++state.steps;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.steps));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.steps));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto w = params[t].values;
        const auto g = gv[t];
        if (w.size() != g.size() || w.size() != state.first[t].size())
            throw ShapeError("optimizer_step: tensor " + std::to_string(t) + " size mismatch");
        const double base_lr = params[t].group == ParamGroup::classifier ? spec.lr_classifier : spec.lr_embed;
        const T lr = static_cast<T>(base_lr * lr_scale);
        const T wd = static_cast<T>(spec.decay);
        auto& m = state.first[t];
        auto& v = state.second[t];
        if (spec.kind == OptimizerKind::sgd) {
            const T mu = static_cast<T>(spec.momentum);
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = mu * m[i] + g[i];
                const T old = w[i];
                w[i] = old - lr * m[i] - lr * wd * old;
            }
        } else {
            const T b1 = static_cast<T>(kAdamBeta1), b2 = static_cast<T>(kAdamBeta2);
            const T c1 = static_cast<T>(bc1), c2 = static_cast<T>(bc2);
            const T eps = static_cast<T>(kAdamEpsilon);
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const T mhat = m[i] / c1;
                const T vhat = v[i] / c2;
                const T old = w[i];
                w[i] = old - lr * mhat / (std::sqrt(vhat) + eps) - lr * wd * old;
            }
        }
    }
}

}  // namespace adapt
