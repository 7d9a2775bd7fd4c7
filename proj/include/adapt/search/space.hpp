#pragma once

#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "adapt/error.hpp"
#include "adapt/pipeline.hpp"
#include "adapt/rng.hpp"

namespace adapt {

enum class DimKind { categorical, uniform, log_uniform, integer };

/// One tunable coordinate. Categorical values are category indices; numeric
/// values are stored untransformed.
struct Dimension {
    std::string name;
    DimKind kind = DimKind::uniform;
    double lo = 0;
    double hi = 1;
    int categories = 0;
    int slot = 0;             // 1-based slot the dimension belongs to
    std::string field;        // hyperparameter name, empty for the switch
};

using Point = std::vector<double>;

/// Typed search space over pipeline configurations: a base configuration
/// plus the dimensions that overwrite it.
class SearchSpace {
public:
    SearchSpace(PipelineConfig base, std::vector<Dimension> dims) : base_(std::move(base)), dims_(std::move(dims)) {
        if (dims_.empty()) throw ConfigError("space", "search space has no dimensions");
        std::unordered_set<std::string> seen;
        for (const auto& d : dims_) {
            if (!seen.insert(d.name).second) throw ConfigError("space." + d.name, "duplicate dimension");
            if (d.kind == DimKind::categorical ? d.categories < 1 : !(d.lo <= d.hi))
                throw ConfigError("space." + d.name, "empty domain");
            if (d.kind == DimKind::log_uniform && d.lo <= 0) throw ConfigError("space." + d.name, "log domain must be positive");
        }
    }

    const std::vector<Dimension>& dims() const { return dims_; }
    std::size_t size() const { return dims_.size(); }
    const PipelineConfig& base() const { return base_; }

    /// Configuration at `p`: the base with every dimension applied.
    PipelineConfig config_at(const Point& p) const {
        if (p.size() != dims_.size()) throw ShapeError("space: point has " + std::to_string(p.size()) + " coordinates");
        PipelineConfig cfg = base_;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            const auto& d = dims_[i];
            Slot& slot = cfg.slot(d.slot);
            if (d.field.empty()) {
                slot.enabled = p[i] >= 0.5;
                continue;
            }
            std::visit(
                [&](auto& hp) {
                    using H = std::decay_t<decltype(hp)>;
                    H::visit(hp, [&](const FieldSpec& f, auto& m) {
                        if (f.name == d.field) set_field_value(f, m, p[i]);
                    });
                },
                slot.hp);
        }
        return cfg;
    }

    /// Coordinates of `cfg` in this space (inverse of config_at on the
    /// dimensions the space covers).
    Point point_of(const PipelineConfig& cfg) const {
        Point p(dims_.size(), 0.0);
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            const auto& d = dims_[i];
            const Slot& slot = cfg.slot(d.slot);
            if (d.field.empty()) {
                p[i] = slot.enabled ? 1.0 : 0.0;
                continue;
            }
            std::visit(
                [&](const auto& hp) {
                    using H = std::decay_t<decltype(hp)>;
                    H::visit(hp, [&](const FieldSpec& f, const auto& m) {
                        if (f.name == d.field) p[i] = field_value(f, m);
                    });
                },
                slot.hp);
        }
        return p;
    }

private:
    PipelineConfig base_;
    std::vector<Dimension> dims_;
};

namespace detail {

inline std::string slot_prefix(int k) {
    static constexpr const char* tags[] = {"tunebn", "transpn", "finetune", "pseudolabel", "entropy", "meanteacher", "fixmatch"};
    const auto kind = static_cast<std::size_t>(kSlotOrder[static_cast<std::size_t>(k - 1)]);
    return std::string(k < 10 ? "s0" : "s") + std::to_string(k) + "_" + tags[kind];
}

inline void append_hp_dims(const PipelineConfig& cfg, int k, std::vector<Dimension>& out) {
    std::visit(
        [&](const auto& hp) {
            using H = std::decay_t<decltype(hp)>;
            H::visit(hp, [&](const FieldSpec& f, const auto&) {
                Dimension d;
                d.name = slot_prefix(k) + "." + std::string(f.name);
                d.slot = k;
                d.field = std::string(f.name);
                d.lo = f.lo;
                d.hi = f.hi;
                switch (f.kind) {
                    case FieldKind::real: d.kind = DimKind::uniform; break;
                    case FieldKind::log_real: d.kind = DimKind::log_uniform; break;
                    case FieldKind::integer:
                    case FieldKind::ratio: d.kind = DimKind::integer; break;
                    default:
                        d.kind = DimKind::categorical;
                        d.categories = category_count(f.kind);
                        d.lo = 0;
                        d.hi = d.categories - 1;
                }
                out.push_back(std::move(d));
            });
        },
        cfg.slot(k).hp);
}

}  // namespace detail

/// Every switch and every hyperparameter of all eleven slots.
inline SearchSpace full_space() {
    const auto base = PipelineConfig::all_off();
    std::vector<Dimension> dims;
    for (int k = 1; k <= kSlotCount; ++k) {
        Dimension sw;
        sw.name = detail::slot_prefix(k) + ".switch";
        sw.kind = DimKind::categorical;
        sw.categories = 2;
        sw.hi = 1;
        sw.slot = k;
        dims.push_back(std::move(sw));
        detail::append_hp_dims(base, k, dims);
    }
    return SearchSpace(base, std::move(dims));
}

/// Fixed switch pattern (exactly `slots` on); only their hyperparameters vary.
inline SearchSpace fixed_switch_space(const std::vector<int>& slots) {
    auto base = PipelineConfig::all_off();
    std::vector<Dimension> dims;
    for (int k : slots) {
        if (k < 1 || k > kSlotCount) throw ConfigError("space.slots", "slot " + std::to_string(k) + " out of range");
        base.slot(k).enabled = true;
    }
    for (int k = 1; k <= kSlotCount; ++k)
        if (base.slot(k).enabled) detail::append_hp_dims(base, k, dims);
    return SearchSpace(base, std::move(dims));
}

/// Hyperparameter space of a baseline preset.
inline SearchSpace preset_space(Preset p) {
    return fixed_switch_space({kPresetTuneBNSlot, p == Preset::PN ? kPresetTransPNSlot : kPresetFinetuneSlot});
}

/// Independent draw of one coordinate from its prior.
inline double sample_prior(const Dimension& d, Rng& rng) {
    switch (d.kind) {
        case DimKind::categorical: return static_cast<double>(rng.below(static_cast<std::uint64_t>(d.categories)));
        case DimKind::uniform: return rng.uniform(d.lo, d.hi);
        case DimKind::log_uniform: return std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
        case DimKind::integer:
            return static_cast<double>(rng.integer(std::llround(d.lo), std::llround(d.hi)));
    }
    return d.lo;
}

inline Point sample_prior(const SearchSpace& space, Rng& rng) {
    Point p;
    p.reserve(space.size());
    for (const auto& d : space.dims()) p.push_back(sample_prior(d, rng));
    return p;
}

}  // namespace adapt
