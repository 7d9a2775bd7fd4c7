#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <type_traits>
#include <variant>
#include <vector>

#include "adapt/error.hpp"
#include "adapt/rng.hpp"
#include "adapt/tensor.hpp"

namespace adapt {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kCosineEpsilon = 1e-8;
inline constexpr double kPowerMin = 0.2;
inline constexpr double kPowerMax = 4.0;

/// Per-feature batch normalization. Running statistics follow
/// new = (1 - momentum) * old + momentum * batch.
template <typename T>
struct BatchNorm {
    VectorT<T> running_mean;
    VectorT<T> running_var;
    VectorT<T> gamma;
    VectorT<T> beta;
    T momentum = T(0.1);

    static BatchNorm identity(Eigen::Index width) {
        return {VectorT<T>::Zero(width), VectorT<T>::Ones(width), VectorT<T>::Ones(width),
                VectorT<T>::Zero(width), T(0.1)};
    }
};

/// Affine map, optional batch norm, optional ReLU (in that order).
template <typename T>
struct DenseLayer {
    MatrixT<T> weight;  // in x out
    VectorT<T> bias;    // out
    std::optional<BatchNorm<T>> bn;
    bool relu = true;

    Eigen::Index in_width() const { return weight.rows(); }
    Eigen::Index out_width() const { return weight.cols(); }
};

template <typename T>
struct PowerScale {
    T p = T(1);
};

template <typename T>
struct LinearHead {
    MatrixT<T> weight;  // embed x classes
    VectorT<T> bias;    // classes
};

/// Scaled-cosine prototype classifier: score_c = tau * cos(embedding, prototype_c).
template <typename T>
struct PrototypeHead {
    MatrixT<T> prototypes;  // classes x embed
    T tau = T(10);
};

template <typename T>
using Head = std::variant<LinearHead<T>, PrototypeHead<T>>;

template <typename T>
struct Model {
    Eigen::Index input_width = 0;
    std::vector<DenseLayer<T>> encoder;
    std::optional<PowerScale<T>> power_scale;
    Head<T> head;

    Eigen::Index embed_width() const {
        return encoder.empty() ? input_width : encoder.back().out_width();
    }

    Eigen::Index n_classes() const {
        return std::visit(
            [](const auto& h) -> Eigen::Index {
                using H = std::decay_t<decltype(h)>;
                if constexpr (std::is_same_v<H, LinearHead<T>>) return h.weight.cols();
                else return h.prototypes.rows();
            },
            head);
    }

    bool has_prototype_head() const { return std::holds_alternative<PrototypeHead<T>>(head); }

    /// Power scaling participates only in front of a prototype head.
    bool power_active() const { return power_scale.has_value() && has_prototype_head(); }

    bool has_batch_norm() const {
        for (const auto& l : encoder)
            if (l.bn) return true;
        return false;
    }
};

/// y_i = sgn(x_i) |x_i|^p.
template <typename T>
T power_scale(T x, T p) {
    if (x == T(0)) return T(0);
    const T m = std::pow(std::abs(x), p);
    return x < T(0) ? -m : m;
}

template <typename Derived>
auto power_scale(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar p) {
    using T = typename Derived::Scalar;
    return x.unaryExpr([p](T v) { return power_scale(v, p); }).eval();
}

inline std::vector<float> power_scale(std::span<const float> x, float p) {
    std::vector<float> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = power_scale(x[i], p);
    return y;
}

// ---------------------------------------------------------------------------
// Construction

template <typename T>
LinearHead<T> make_linear_head(Eigen::Index embed, Eigen::Index classes, Rng& rng) {
    LinearHead<T> h{MatrixT<T>(embed, classes), VectorT<T>::Zero(classes)};
    const double bound = std::sqrt(6.0 / static_cast<double>(embed + classes));
    for (Eigen::Index i = 0; i < h.weight.size(); ++i)
        h.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    return h;
}

template <typename T>
DenseLayer<T> make_dense(Eigen::Index in, Eigen::Index out, bool batch_norm, bool relu, Rng& rng) {
    DenseLayer<T> l{MatrixT<T>(in, out), VectorT<T>::Zero(out), std::nullopt, relu};
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i)
        l.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    if (batch_norm) l.bn = BatchNorm<T>::identity(out);
    return l;
}

/// Feedforward encoder (affine -> BN -> ReLU per hidden layer) with a linear head.
template <typename T>
Model<T> make_model(Eigen::Index input_width, const std::vector<int>& hidden, Eigen::Index classes,
                    std::uint64_t seed, bool batch_norm = true) {
    Rng rng(seed);
    Model<T> m;
    m.input_width = input_width;
    Eigen::Index width = input_width;
    for (int h : hidden) {
        m.encoder.push_back(make_dense<T>(width, h, batch_norm, true, rng));
        width = h;
    }
    m.head = make_linear_head<T>(width, classes, rng);
    return m;
}

template <typename U, typename T>
Model<U> cast_model(const Model<T>& m) {
    Model<U> out;
    out.input_width = m.input_width;
    for (const auto& l : m.encoder) {
        DenseLayer<U> d{l.weight.template cast<U>(), l.bias.template cast<U>(), std::nullopt, l.relu};
        if (l.bn)
            d.bn = BatchNorm<U>{l.bn->running_mean.template cast<U>(), l.bn->running_var.template cast<U>(),
                                l.bn->gamma.template cast<U>(), l.bn->beta.template cast<U>(),
                                static_cast<U>(l.bn->momentum)};
        out.encoder.push_back(std::move(d));
    }
    if (m.power_scale) out.power_scale = PowerScale<U>{static_cast<U>(m.power_scale->p)};
    std::visit(
        [&](const auto& h) {
            using H = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<H, LinearHead<T>>)
                out.head = LinearHead<U>{h.weight.template cast<U>(), h.bias.template cast<U>()};
            else
                out.head = PrototypeHead<U>{h.prototypes.template cast<U>(), static_cast<U>(h.tau)};
        },
        m.head);
    return out;
}

// ---------------------------------------------------------------------------
// Forward

enum class Mode { eval, train };

template <typename T>
struct LayerCache {
    MatrixT<T> input;
    MatrixT<T> normalized;  // x-hat, BN layers only
    VectorT<T> inv_std;     // BN layers only
    MatrixT<T> pre_activation;
    VectorT<T> batch_mean;  // train mode only
    VectorT<T> batch_var;
};

template <typename T>
struct ForwardCache {
    Mode mode = Mode::eval;
    std::vector<LayerCache<T>> layers;
    MatrixT<T> encoded;    // encoder output
    MatrixT<T> embedding;  // after power scaling (if active)
    MatrixT<T> unit_embedding;
    VectorT<T> embedding_norm;
    MatrixT<T> unit_prototypes;
    VectorT<T> prototype_norm;
};

namespace detail {

template <typename T>
void normalize_rows(const MatrixT<T>& x, MatrixT<T>& unit, VectorT<T>& norm) {
    unit.resize(x.rows(), x.cols());
    norm.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T n = x.row(r).norm();
        norm(r) = n;
        unit.row(r) = x.row(r) / std::max(n, static_cast<T>(kCosineEpsilon));
    }
}

template <typename T>
MatrixT<T> run_head(const Model<T>& model, const MatrixT<T>& embedding, ForwardCache<T>& cache) {
    return std::visit(
        [&](const auto& h) -> MatrixT<T> {
            using H = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<H, LinearHead<T>>) {
                MatrixT<T> s = embedding * h.weight;
                s.rowwise() += h.bias.transpose();
                return s;
            } else {
                normalize_rows(embedding, cache.unit_embedding, cache.embedding_norm);
                normalize_rows(h.prototypes, cache.unit_prototypes, cache.prototype_norm);
                return h.tau * (cache.unit_embedding * cache.unit_prototypes.transpose());
            }
        },
        model.head);
}

}  // namespace detail

/// Shared forward pass. Never mutates the model; in train mode the batch
/// statistics of every BN layer are left in `cache` for the caller to fold
/// into the running statistics.
template <typename T>
MatrixT<T> forward_cached(const Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch, Mode mode,
                          ForwardCache<T>& cache) {
    if (batch.cols() != model.input_width)
        throw ShapeError("forward: batch is " + shape_str(batch.rows(), batch.cols()) +
                         ", model expects " + std::to_string(model.input_width) + " columns");
    cache.mode = mode;
    cache.layers.resize(model.encoder.size());
    MatrixT<T> x = batch;
    const T eps = static_cast<T>(kBatchNormEpsilon);
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
        const auto& layer = model.encoder[i];
        auto& lc = cache.layers[i];
        lc.input = std::move(x);
        MatrixT<T> z = lc.input * layer.weight;
        z.rowwise() += layer.bias.transpose();
        if (layer.bn) {
            const auto& bn = *layer.bn;
            VectorT<T> mean, var;
            if (mode == Mode::train) {
                mean = z.colwise().mean().transpose();
                var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
                lc.batch_mean = mean;
                lc.batch_var = var;
            } else {
                mean = bn.running_mean;
                var = bn.running_var;
            }
            lc.inv_std = (var.array() + eps).rsqrt().matrix();
            lc.normalized = (z.rowwise() - mean.transpose()).array().rowwise() * lc.inv_std.transpose().array();
            z = (lc.normalized.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
                bn.beta.transpose().array();
        }
        lc.pre_activation = z;
        if (layer.relu) z = z.cwiseMax(T(0));
        x = std::move(z);
    }
    cache.encoded = std::move(x);
    if (model.power_active())
        cache.embedding = power_scale(cache.encoded, model.power_scale->p);
    else
        cache.embedding = cache.encoded;
    return detail::run_head(model, cache.embedding, cache);
}

/// Fold the batch statistics recorded by a train-mode forward into the
/// running statistics.
template <typename T>
void update_running_stats(Model<T>& model, const ForwardCache<T>& cache) {
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
        auto& bn = model.encoder[i].bn;
        if (!bn) continue;
        const T m = bn->momentum;
        bn->running_mean = (T(1) - m) * bn->running_mean + m * cache.layers[i].batch_mean;
        bn->running_var = (T(1) - m) * bn->running_var + m * cache.layers[i].batch_var;
    }
}

/// Class scores for `batch`. Eval mode uses running statistics and leaves
/// the model untouched; train mode normalizes by batch statistics and
/// updates the running statistics.
template <typename T>
MatrixT<T> forward(Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch, Mode mode) {
    ForwardCache<T> cache;
    MatrixT<T> s = forward_cached(model, batch, mode, cache);
    if (mode == Mode::train) update_running_stats(model, cache);
    return s;
}

template <typename T>
MatrixT<T> predict(const Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch) {
    ForwardCache<T> cache;
    return forward_cached(model, batch, Mode::eval, cache);
}

/// Eval-mode embedding fed to the head (power scaled when active).
template <typename T>
MatrixT<T> embed(const Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch) {
    ForwardCache<T> cache;
    forward_cached(model, batch, Mode::eval, cache);
    return cache.embedding;
}

/// Encoder output, before any power scaling.
template <typename T>
MatrixT<T> encode(const Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch) {
    ForwardCache<T> cache;
    forward_cached(model, batch, Mode::eval, cache);
    return cache.encoded;
}

// ---------------------------------------------------------------------------
// Gradients

enum class ParamGroup { embed, classifier };

template <typename T>
struct LayerGrads {
    MatrixT<T> weight;
    VectorT<T> bias;
    VectorT<T> gamma;  // empty without BN
    VectorT<T> beta;
};

template <typename T>
struct Gradients {
    std::vector<LayerGrads<T>> layers;
    MatrixT<T> head_weight;  // linear weight or prototypes
    VectorT<T> head_bias;    // empty for prototype heads

    static Gradients zeros_like(const Model<T>& m) {
        Gradients g;
        for (const auto& l : m.encoder) {
            LayerGrads<T> lg{MatrixT<T>::Zero(l.weight.rows(), l.weight.cols()), VectorT<T>::Zero(l.bias.size()),
                             VectorT<T>(), VectorT<T>()};
            if (l.bn) {
                lg.gamma = VectorT<T>::Zero(l.bn->gamma.size());
                lg.beta = VectorT<T>::Zero(l.bn->beta.size());
            }
            g.layers.push_back(std::move(lg));
        }
        std::visit(
            [&](const auto& h) {
                using H = std::decay_t<decltype(h)>;
                if constexpr (std::is_same_v<H, LinearHead<T>>) {
                    g.head_weight = MatrixT<T>::Zero(h.weight.rows(), h.weight.cols());
                    g.head_bias = VectorT<T>::Zero(h.bias.size());
                } else {
                    g.head_weight = MatrixT<T>::Zero(h.prototypes.rows(), h.prototypes.cols());
                }
            },
            m.head);
        return g;
    }

    /// this += scale * other
    void add_scaled(const Gradients& other, T scale) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight += scale * other.layers[i].weight;
            layers[i].bias += scale * other.layers[i].bias;
            if (layers[i].gamma.size()) {
                layers[i].gamma += scale * other.layers[i].gamma;
                layers[i].beta += scale * other.layers[i].beta;
            }
        }
        head_weight += scale * other.head_weight;
        if (head_bias.size()) head_bias += scale * other.head_bias;
    }
};

template <typename T>
struct ParamView {
    std::span<T> values;
    ParamGroup group;
};

namespace detail {

template <typename X>
auto span_of(X& x) {
    using T = std::remove_reference_t<decltype(*x.data())>;
    return std::span<T>(x.data(), static_cast<std::size_t>(x.size()));
}

}  // namespace detail

/// Every trainable tensor, in a fixed order. Running statistics, the power
/// exponent and tau are not trainable.
template <typename T>
std::vector<ParamView<T>> param_views(Model<T>& model) {
    std::vector<ParamView<T>> out;
    for (auto& l : model.encoder) {
        out.push_back({detail::span_of(l.weight), ParamGroup::embed});
        out.push_back({detail::span_of(l.bias), ParamGroup::embed});
        if (l.bn) {
            out.push_back({detail::span_of(l.bn->gamma), ParamGroup::embed});
            out.push_back({detail::span_of(l.bn->beta), ParamGroup::embed});
        }
    }
    std::visit(
        [&](auto& h) {
            using H = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<H, LinearHead<T>>) {
                out.push_back({detail::span_of(h.weight), ParamGroup::classifier});
                out.push_back({detail::span_of(h.bias), ParamGroup::classifier});
            } else {
                out.push_back({detail::span_of(h.prototypes), ParamGroup::classifier});
            }
        },
        model.head);
    return out;
}

template <typename T>
std::vector<std::span<const T>> param_views(const Model<T>& model) {
    std::vector<std::span<const T>> out;
    for (auto& v : param_views(const_cast<Model<T>&>(model))) out.emplace_back(v.values.data(), v.values.size());
    return out;
}

/// Gradient tensors in the order of param_views().
template <typename T>
std::vector<std::span<const T>> grad_views(const Gradients<T>& g) {
    std::vector<std::span<const T>> out;
    for (const auto& l : g.layers) {
        out.push_back(detail::span_of(l.weight));
        out.push_back(detail::span_of(l.bias));
        if (l.gamma.size()) {
            out.push_back(detail::span_of(l.gamma));
            out.push_back(detail::span_of(l.beta));
        }
    }
    out.push_back(detail::span_of(g.head_weight));
    if (g.head_bias.size()) out.push_back(detail::span_of(g.head_bias));
    return out;
}

namespace detail {

/// d(unit)/d(x) applied to d_unit, row-wise, for unit = x / max(|x|, eps).
template <typename T>
MatrixT<T> normalize_backward(const MatrixT<T>& unit, const VectorT<T>& norm, const MatrixT<T>& d_unit) {
    MatrixT<T> dx(unit.rows(), unit.cols());
    const T eps = static_cast<T>(kCosineEpsilon);
    for (Eigen::Index r = 0; r < unit.rows(); ++r) {
        if (norm(r) > eps) {
            const T proj = unit.row(r).dot(d_unit.row(r));
            dx.row(r) = (d_unit.row(r) - proj * unit.row(r)) / norm(r);
        } else {
            dx.row(r) = d_unit.row(r) / eps;
        }
    }
    return dx;
}

}  // namespace detail

/// Gradients of sum(score_grads .* scores) with respect to every trainable
/// parameter, given the cache of the forward pass that produced `scores`.
template <typename T>
Gradients<T> backward(const Model<T>& model, const ForwardCache<T>& cache,
                      const std::type_identity_t<MatrixT<T>>& score_grads) {
    const Eigen::Index n = cache.embedding.rows();
    if (score_grads.rows() != n || score_grads.cols() != model.n_classes())
        throw ShapeError("backward: score gradients are " + shape_str(score_grads.rows(), score_grads.cols()) +
                         ", scores are " + shape_str(n, model.n_classes()));
    Gradients<T> g = Gradients<T>::zeros_like(model);

    MatrixT<T> d_embed = std::visit(
        [&](const auto& h) -> MatrixT<T> {
            using H = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<H, LinearHead<T>>) {
                g.head_weight = cache.embedding.transpose() * score_grads;
                g.head_bias = score_grads.colwise().sum().transpose();
                return score_grads * h.weight.transpose();
            } else {
                const MatrixT<T> d_unit_e = h.tau * (score_grads * cache.unit_prototypes);
                const MatrixT<T> d_unit_p = h.tau * (score_grads.transpose() * cache.unit_embedding);
                g.head_weight = detail::normalize_backward(cache.unit_prototypes, cache.prototype_norm, d_unit_p);
                return detail::normalize_backward(cache.unit_embedding, cache.embedding_norm, d_unit_e);
            }
        },
        model.head);

    MatrixT<T> dx;
    if (model.power_active()) {
        const T p = model.power_scale->p;
        dx = d_embed;
        for (Eigen::Index i = 0; i < dx.size(); ++i) {
            const T x = cache.encoded.data()[i];
            dx.data()[i] = x == T(0) ? T(0) : dx.data()[i] * p * std::pow(std::abs(x), p - T(1));
        }
    } else {
        dx = std::move(d_embed);
    }

    for (std::size_t i = model.encoder.size(); i-- > 0;) {
        const auto& layer = model.encoder[i];
        const auto& lc = cache.layers[i];
        auto& lg = g.layers[i];
        MatrixT<T> dz = std::move(dx);
        if (layer.relu) dz = (lc.pre_activation.array() > T(0)).select(dz, T(0));
        if (layer.bn) {
            const auto& bn = *layer.bn;
            lg.gamma = (dz.array() * lc.normalized.array()).colwise().sum().transpose();
            lg.beta = dz.colwise().sum().transpose();
            MatrixT<T> dxhat = dz.array().rowwise() * bn.gamma.transpose().array();
            if (cache.mode == Mode::train) {
                const T rows = static_cast<T>(dxhat.rows());
                const RowVectorT<T> sum_dxhat = dxhat.colwise().sum();
                const RowVectorT<T> sum_dxhat_xhat = (dxhat.array() * lc.normalized.array()).colwise().sum();
                MatrixT<T> t = (dxhat * rows).rowwise() - sum_dxhat;
                t -= (lc.normalized.array().rowwise() * sum_dxhat_xhat.array()).matrix();
                dz = (t.array().rowwise() * (lc.inv_std.transpose().array() / rows)).matrix();
            } else {
                dz = dxhat.array().rowwise() * lc.inv_std.transpose().array();
            }
        }
        lg.weight = lc.input.transpose() * dz;
        lg.bias = dz.colwise().sum().transpose();
        if (i > 0) dx = dz * layer.weight.transpose();
    }
    return g;
}

/// Convenience: forward in `mode` then backward. Running statistics are not
/// updated.
template <typename T>
Gradients<T> backward(const Model<T>& model, const std::type_identity_t<MatrixT<T>>& batch,
                      const std::type_identity_t<MatrixT<T>>& score_grads,
                      Mode mode = Mode::eval) {
    ForwardCache<T> cache;
    forward_cached(model, batch, mode, cache);
    return backward(model, cache, score_grads);
}

}  // namespace adapt
