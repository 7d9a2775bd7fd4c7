#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adapt/augment.hpp"
#include "adapt/error.hpp"
#include "adapt/optimizer.hpp"

namespace adapt {

/// How a hyperparameter is typed, serialized and searched.
enum class FieldKind {
    on_off,     // bool, "on"/"off"
    yes_no,     // bool, "yes"/"no"
    real,       // double, uniform on [lo, hi]
    log_real,   // double, log-uniform on [lo, hi]
    integer,    // int on [lo, hi]
    ratio,      // int r on [lo, hi], serialized "1:r"
    optimizer,  // OptimizerKind, "sgd"/"adam"
    augmentation,
};

struct FieldSpec {
    std::string_view name;
    FieldKind kind;
    double lo = 0;
    double hi = 0;
};

/// Number of categories of a categorical field (0 for numeric ones).
inline int category_count(FieldKind k) {
    switch (k) {
        case FieldKind::on_off:
        case FieldKind::yes_no:
        case FieldKind::optimizer: return 2;
        case FieldKind::augmentation: return static_cast<int>(kAugmentationNames.size());
        default: return 0;
    }
}

struct FinetuneHP {
    bool reinitialize = true;
    OptimizerKind optimizer = OptimizerKind::adam;
    Augmentation aug = Augmentation::normal;
    double lr_classifier = 1e-2;
    double lr_embed = 1e-3;
    double step = 0.7;
    double decay = 1e-5;
    double momentum = 0.9;
    int epochs = 30;
    int batch_size = 16;

    static constexpr std::string_view kModule = "Finetune";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"reinitialize", FieldKind::yes_no}, s.reinitialize);
        fn(FieldSpec{"optimizer", FieldKind::optimizer}, s.optimizer);
        fn(FieldSpec{"aug", FieldKind::augmentation}, s.aug);
        fn(FieldSpec{"lr_classifier", FieldKind::log_real, 1e-5, 1e-1}, s.lr_classifier);
        fn(FieldSpec{"lr_embed", FieldKind::log_real, 1e-5, 1e-1}, s.lr_embed);
        fn(FieldSpec{"step", FieldKind::real, 0.2, 1.0}, s.step);
        fn(FieldSpec{"decay", FieldKind::log_real, 1e-7, 1e-3}, s.decay);
        fn(FieldSpec{"momentum", FieldKind::real, 0.7, 0.99}, s.momentum);
        fn(FieldSpec{"epochs", FieldKind::integer, 1, 90}, s.epochs);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
    }

    OptimizerSpec optimizer_spec() const { return {optimizer, lr_classifier, lr_embed, momentum, decay}; }
    bool operator==(const FinetuneHP&) const = default;
};

struct TransPNHP {
    double p = 1.0;
    double tau = 10.0;
    bool cipa_switch = false;
    int cipa_rounds = 4;
    double cipa_unlabeled_weight = 0.5;

    static constexpr std::string_view kModule = "TransPN";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"p", FieldKind::real, 0.2, 4.0}, s.p);
        fn(FieldSpec{"tau", FieldKind::real, 5.0, 32.0}, s.tau);
        fn(FieldSpec{"cipa_switch", FieldKind::on_off}, s.cipa_switch);
        fn(FieldSpec{"cipa_rounds", FieldKind::integer, 1, 32}, s.cipa_rounds);
        fn(FieldSpec{"cipa_unlabeled_weight", FieldKind::log_real, 0.001, 10.0}, s.cipa_unlabeled_weight);
    }
    bool operator==(const TransPNHP&) const = default;
};

struct TuneBNHP {
    double momentum_entry = 0.1;
    int iterations = 10;
    int batch_size = 32;

    static constexpr std::string_view kModule = "TuneBN";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"momentum_entry", FieldKind::log_real, 1e-5, 1.0}, s.momentum_entry);
        fn(FieldSpec{"iterations", FieldKind::integer, 1, 50}, s.iterations);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
    }
    bool operator==(const TuneBNHP&) const = default;
};

struct PseudoLabelHP {
    double pseudo_weight = 0.5;
    double threshold = 0.9;
    double lr = 1e-3;
    int epochs = 5;
    int batch_size = 16;
    Augmentation aug_labeled = Augmentation::normal;
    Augmentation aug_unlabeled = Augmentation::weak1;

    static constexpr std::string_view kModule = "SSL-PseudoLabel";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"pseudo_weight", FieldKind::real, 0.0, 1.0}, s.pseudo_weight);
        fn(FieldSpec{"threshold", FieldKind::real, 0.5, 1.0}, s.threshold);
        fn(FieldSpec{"lr", FieldKind::log_real, 1e-5, 0.1}, s.lr);
        fn(FieldSpec{"epochs", FieldKind::integer, 1, 20}, s.epochs);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
        fn(FieldSpec{"aug_labeled", FieldKind::augmentation}, s.aug_labeled);
        fn(FieldSpec{"aug_unlabeled", FieldKind::augmentation}, s.aug_unlabeled);
    }
    bool operator==(const PseudoLabelHP&) const = default;
};

struct EntropyHP {
    double entropy_weight = 0.5;
    double threshold = 0.3;  // on entropy / ln(n_way)
    double lr = 1e-3;
    int epochs = 5;
    int batch_size = 16;

    static constexpr std::string_view kModule = "SSL-Entropy";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"entropy_weight", FieldKind::real, 0.0, 1.0}, s.entropy_weight);
        fn(FieldSpec{"threshold", FieldKind::real, 0.0, 0.6}, s.threshold);
        fn(FieldSpec{"lr", FieldKind::log_real, 1e-5, 0.1}, s.lr);
        fn(FieldSpec{"epochs", FieldKind::integer, 1, 20}, s.epochs);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
    }
    bool operator==(const EntropyHP&) const = default;
};

struct MeanTeacherHP {
    bool reinitialize = false;
    OptimizerKind optimizer = OptimizerKind::adam;
    double pseudo_weight = 0.5;
    double threshold = 0.9;
    double lr = 1e-3;
    double decay = 1e-5;
    double momentum = 0.9;
    int epochs = 5;
    int batch_size = 16;
    Augmentation aug_labeled = Augmentation::normal;
    Augmentation aug_unlabeled = Augmentation::weak1;

    static constexpr std::string_view kModule = "SSL-MeanTeacher";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"reinitialize", FieldKind::yes_no}, s.reinitialize);
        fn(FieldSpec{"optimizer", FieldKind::optimizer}, s.optimizer);
        fn(FieldSpec{"pseudo_weight", FieldKind::real, 0.0, 1.0}, s.pseudo_weight);
        fn(FieldSpec{"threshold", FieldKind::real, 0.5, 1.0}, s.threshold);
        fn(FieldSpec{"lr", FieldKind::log_real, 1e-5, 0.1}, s.lr);
        fn(FieldSpec{"decay", FieldKind::log_real, 1e-7, 1e-3}, s.decay);
        fn(FieldSpec{"momentum", FieldKind::real, 0.7, 0.99}, s.momentum);
        fn(FieldSpec{"epochs", FieldKind::integer, 1, 20}, s.epochs);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
        fn(FieldSpec{"aug_labeled", FieldKind::augmentation}, s.aug_labeled);
        fn(FieldSpec{"aug_unlabeled", FieldKind::augmentation}, s.aug_unlabeled);
    }

    OptimizerSpec optimizer_spec() const { return {optimizer, lr, lr, momentum, decay}; }
    bool operator==(const MeanTeacherHP&) const = default;
};

struct FixMatchHP {
    bool reinitialize = false;
    OptimizerKind optimizer = OptimizerKind::adam;
    double pseudo_weight = 0.5;
    double threshold = 0.95;
    double lr = 1e-3;
    double decay = 1e-5;
    double momentum = 0.9;
    int epochs = 5;
    int batch_size = 16;
    int label_unlabeled_ratio = 3;  // 1:r
    bool teacher = false;

    static constexpr std::string_view kModule = "SSL-FixMatch";

    template <typename Self, typename Fn>
    static void visit(Self& s, Fn&& fn) {
        fn(FieldSpec{"reinitialize", FieldKind::yes_no}, s.reinitialize);
        fn(FieldSpec{"optimizer", FieldKind::optimizer}, s.optimizer);
        fn(FieldSpec{"pseudo_weight", FieldKind::real, 0.0, 1.0}, s.pseudo_weight);
        fn(FieldSpec{"threshold", FieldKind::real, 0.5, 1.0}, s.threshold);
        fn(FieldSpec{"lr", FieldKind::log_real, 1e-5, 0.1}, s.lr);
        fn(FieldSpec{"decay", FieldKind::log_real, 1e-7, 1e-3}, s.decay);
        fn(FieldSpec{"momentum", FieldKind::real, 0.7, 0.99}, s.momentum);
        fn(FieldSpec{"epochs", FieldKind::integer, 1, 20}, s.epochs);
        fn(FieldSpec{"batch_size", FieldKind::integer, 8, 48}, s.batch_size);
        fn(FieldSpec{"label_unlabeled_ratio", FieldKind::ratio, 1, 10}, s.label_unlabeled_ratio);
        fn(FieldSpec{"teacher", FieldKind::yes_no}, s.teacher);
    }

    OptimizerSpec optimizer_spec() const { return {optimizer, lr, lr, momentum, decay}; }
    bool operator==(const FixMatchHP&) const = default;
};

// ---------------------------------------------------------------------------
// Uniform field access. Every field maps to a double: categorical fields by
// category index, numeric fields by value.

namespace detail {

inline void check_range(const FieldSpec& f, double v, const std::string& path) {
    if (!std::isfinite(v) || v < f.lo || v > f.hi)
        throw ConfigError(path, "value " + nlohmann::json(v).dump() + " outside [" + nlohmann::json(f.lo).dump() +
                                    ", " + nlohmann::json(f.hi).dump() + "]");
}

}  // namespace detail

template <typename M>
double field_value(const FieldSpec& f, const M& member) {
    if constexpr (std::is_same_v<M, bool>) return member ? 1.0 : 0.0;
    else if constexpr (std::is_same_v<M, OptimizerKind> || std::is_same_v<M, Augmentation>)
        return static_cast<double>(static_cast<int>(member));
    else {
        (void)f;
        return static_cast<double>(member);
    }
}

template <typename M>
void set_field_value(const FieldSpec& f, M& member, double v) {
    if constexpr (std::is_same_v<M, bool>) member = v >= 0.5;
    else if constexpr (std::is_same_v<M, OptimizerKind>) member = v >= 0.5 ? OptimizerKind::adam : OptimizerKind::sgd;
    else if constexpr (std::is_same_v<M, Augmentation>) {
        const int n = category_count(f.kind);
        member = static_cast<Augmentation>(std::clamp(static_cast<int>(std::lround(v)), 0, n - 1));
    } else if constexpr (std::is_same_v<M, int>) {
        member = static_cast<int>(std::clamp(std::lround(v), std::lround(f.lo), std::lround(f.hi)));
    } else {
        member = std::clamp(v, f.lo, f.hi);
    }
}

template <typename M>
nlohmann::json field_to_json(const FieldSpec& f, const M& member) {
    if constexpr (std::is_same_v<M, bool>) {
        if (f.kind == FieldKind::on_off) return member ? "on" : "off";
        return member ? "yes" : "no";
    } else if constexpr (std::is_same_v<M, OptimizerKind>) {
        return to_string(member);
    } else if constexpr (std::is_same_v<M, Augmentation>) {
        return to_string(member);
    } else if constexpr (std::is_same_v<M, int>) {
        if (f.kind == FieldKind::ratio) return "1:" + std::to_string(member);
        return member;
    } else {
        return member;
    }
}

template <typename M>
void field_from_json(const FieldSpec& f, M& member, const nlohmann::json& j, const std::string& path) {
    if constexpr (std::is_same_v<M, bool>) {
        const char* yes = f.kind == FieldKind::on_off ? "on" : "yes";
        const char* no = f.kind == FieldKind::on_off ? "off" : "no";
        if (j == yes) member = true;
        else if (j == no) member = false;
        else throw ConfigError(path, std::string("expected \"") + yes + "\" or \"" + no + "\"");
    } else if constexpr (std::is_same_v<M, OptimizerKind>) {
        if (j == "sgd") member = OptimizerKind::sgd;
        else if (j == "adam") member = OptimizerKind::adam;
        else throw ConfigError(path, "expected \"sgd\" or \"adam\"");
    } else if constexpr (std::is_same_v<M, Augmentation>) {
        const auto a = j.is_string() ? parse_augmentation(j.get<std::string>()) : std::nullopt;
        if (!a) throw ConfigError(path, "unknown augmentation");
        member = *a;
    } else if constexpr (std::is_same_v<M, int>) {
        long long v = 0;
        if (f.kind == FieldKind::ratio) {
            const std::string s = j.is_string() ? j.get<std::string>() : "";
            if (s.size() < 3 || s.rfind("1:", 0) != 0) throw ConfigError(path, "expected \"1:r\"");
            try {
                std::size_t used = 0;
                v = std::stoll(s.substr(2), &used);
                if (used != s.size() - 2) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw ConfigError(path, "expected \"1:r\"");
            }
        } else {
            if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
            v = j.get<long long>();
        }
        detail::check_range(f, static_cast<double>(v), path);
        member = static_cast<int>(v);
    } else {
        if (!j.is_number()) throw ConfigError(path, "expected a number");
        const double v = j.get<double>();
        detail::check_range(f, v, path);
        member = v;
    }
}

template <typename HP>
nlohmann::json hp_to_json(const HP& hp) {
    nlohmann::json j = nlohmann::json::object();
    HP::visit(hp, [&](const FieldSpec& f, const auto& m) { j[std::string(f.name)] = field_to_json(f, m); });
    return j;
}

/// Strict decode: every field required, unknown fields rejected, values
/// range-checked.
template <typename HP>
HP hp_from_json(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    HP hp;
    std::size_t seen = 0;
    HP::visit(hp, [&](const FieldSpec& f, auto& m) {
        const std::string key(f.name);
        if (!j.contains(key)) throw ConfigError(path + "." + key, "missing field");
        field_from_json(f, m, j.at(key), path + "." + key);
        ++seen;
    });
    if (seen != j.size()) {
        for (const auto& [key, _] : j.items()) {
            bool known = false;
            HP::visit(hp, [&](const FieldSpec& f, const auto&) { known = known || f.name == key; });
            if (!known) throw ConfigError(path + "." + key, "unknown field");
        }
    }
    return hp;
}

/// Range check of an in-memory record.
template <typename HP>
void validate_hp(const HP& hp, const std::string& path) {
    HP::visit(hp, [&](const FieldSpec& f, const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, int> || std::is_same_v<M, double>)
            detail::check_range(f, static_cast<double>(m), path + "." + std::string(f.name));
    });
}

/// Operator-side check: numeric fields finite and non-negative. Looser than
/// validate_hp so degenerate settings (zero rates, zero momentum) still run.
template <typename HP>
void check_operable(const HP& hp, const std::string& path) {
    HP::visit(hp, [&](const FieldSpec& f, const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, int> || std::is_same_v<M, double>) {
            const auto v = static_cast<double>(m);
            if (!std::isfinite(v) || v < 0)
                throw ConfigError(path + "." + std::string(f.name), "must be finite and non-negative");
        }
    });
}

}  // namespace adapt
