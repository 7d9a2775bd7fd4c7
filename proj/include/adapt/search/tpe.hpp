#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "adapt/search/space.hpp"

namespace adapt {

struct TpeOptions {
    int n_startup = 20;
    double gamma = 0.25;
    int n_ei = 24;
    double prior_weight = 1.0;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Bounds of a numeric dimension in the space the estimator works in: log
/// for log-uniform, widened by half a step for integers.
inline std::pair<double, double> internal_bounds(const Dimension& d) {
    switch (d.kind) {
        case DimKind::log_uniform: return {std::log(d.lo), std::log(d.hi)};
        case DimKind::integer: return {d.lo - 0.5, d.hi + 0.5};
        default: return {d.lo, d.hi};
    }
}

inline double to_internal(const Dimension& d, double v) { return d.kind == DimKind::log_uniform ? std::log(v) : v; }

inline double from_internal(const Dimension& d, double x) {
    switch (d.kind) {
        case DimKind::log_uniform: return std::clamp(std::exp(x), d.lo, d.hi);
        case DimKind::integer: return std::clamp(std::round(x), d.lo, d.hi);
        default: return std::clamp(x, d.lo, d.hi);
    }
}

/// Uniform prior plus one truncated Gaussian per observation; bandwidth by
/// Scott's rule, floored at range / min(100, 1 + n).
class ParzenEstimator {
public:
    ParzenEstimator(std::vector<double> obs, double lo, double hi, double prior_weight)
        : obs_(std::move(obs)), lo_(lo), hi_(hi), prior_(prior_weight) {
        const double range = hi_ - lo_;
        const auto n = static_cast<double>(obs_.size());
        double sd = 0;
        if (obs_.size() > 1) {
            const double mean = std::accumulate(obs_.begin(), obs_.end(), 0.0) / n;
            for (double o : obs_) sd += (o - mean) * (o - mean);
            sd = std::sqrt(sd / n);
        }
        const double floor = range / std::min(100.0, 1.0 + n);
        sigma_ = std::clamp(sd * std::pow(std::max(n, 1.0), -0.2), floor, std::max(floor, range));
        for (double o : obs_)
            mass_.push_back(normal_cdf((hi_ - o) / sigma_) - normal_cdf((lo_ - o) / sigma_));
    }

    double log_density(double x) const {
        const double range = hi_ - lo_;
        double acc = range > 0 ? prior_ / range : prior_;
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            const double z = (x - obs_[i]) / sigma_;
            acc += std::exp(-0.5 * z * z) / (sigma_ * std::sqrt(2 * std::numbers::pi) * mass_[i]);
        }
        return std::log(acc / (prior_ + static_cast<double>(obs_.size())));
    }

    double sample(Rng& rng) const {
        const double total = prior_ + static_cast<double>(obs_.size());
        const double pick = rng.uniform() * total;
        if (pick < prior_ || obs_.empty()) return rng.uniform(lo_, hi_);
        const auto i = std::min(obs_.size() - 1, static_cast<std::size_t>(pick - prior_));
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const double x = obs_[i] + sigma_ * rng.normal();
            if (x >= lo_ && x <= hi_) return x;
        }
        return std::clamp(obs_[i], lo_, hi_);
    }

private:
    std::vector<double> obs_;
    std::vector<double> mass_;
    double lo_, hi_, prior_, sigma_ = 1;
};

/// Smoothed category frequencies (c_k + 1) / (n + K).
inline std::vector<double> category_probabilities(const std::vector<double>& obs, int categories) {
    std::vector<double> p(static_cast<std::size_t>(categories), 1.0);
    for (double o : obs) p[static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(o)), 0, categories - 1))] += 1.0;
    for (auto& v : p) v /= static_cast<double>(obs.size()) + categories;
    return p;
}

inline std::size_t sample_category(const std::vector<double>& p, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (u < p[k]) return k;
        u -= p[k];
    }
    return p.size() - 1;
}

}  // namespace detail

/// Indices of `scores` ordered best first; ties keep trial order.
inline std::vector<std::size_t> rank_by_score(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

/// Next point to evaluate (scores are maximized). Below n_startup
/// observations the prior is sampled; afterwards the best ceil(gamma * n)
/// observations form the good set, every dimension gets independent good
/// and bad densities, and the best of n_ei draws from the good densities by
/// sum of log(l / g) is returned.
inline Point tpe_suggest(const SearchSpace& space, const std::vector<Point>& points, const std::vector<double>& scores,
                         Rng& rng, const TpeOptions& opt = {}) {
    if (points.size() != scores.size()) throw ShapeError("tpe: points and scores differ in length");
    if (points.size() < static_cast<std::size_t>(std::max(opt.n_startup, 2))) return sample_prior(space, rng);

    const auto order = rank_by_score(scores);
    const auto n = points.size();
    const auto n_good = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(opt.gamma * static_cast<double>(n))), 1, n - 1);

    const auto& dims = space.dims();
    const auto n_cand = static_cast<std::size_t>(std::max(opt.n_ei, 1));
    std::vector<Point> cand(n_cand, Point(dims.size(), 0.0));
    std::vector<double> gain(n_cand, 0.0);

    for (std::size_t j = 0; j < dims.size(); ++j) {
        const auto& d = dims[j];
        std::vector<double> good, bad;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = points[order[r]][j];
            (r < n_good ? good : bad).push_back(d.kind == DimKind::categorical ? v : detail::to_internal(d, v));
        }
        if (d.kind == DimKind::categorical) {
            const auto pl = detail::category_probabilities(good, d.categories);
            const auto pg = detail::category_probabilities(bad, d.categories);
            for (std::size_t c = 0; c < n_cand; ++c) {
                const auto k = detail::sample_category(pl, rng);
                cand[c][j] = static_cast<double>(k);
                gain[c] += std::log(pl[k]) - std::log(pg[k]);
            }
        } else {
            const auto [lo, hi] = detail::internal_bounds(d);
            const detail::ParzenEstimator l(std::move(good), lo, hi, opt.prior_weight);
            const detail::ParzenEstimator g(std::move(bad), lo, hi, opt.prior_weight);
            for (std::size_t c = 0; c < n_cand; ++c) {
                const double x = l.sample(rng);
                cand[c][j] = detail::from_internal(d, x);
                gain[c] += l.log_density(x) - g.log_density(x);
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::max_element(gain.begin(), gain.end()) - gain.begin());
    return cand[best];
}

}  // namespace adapt
