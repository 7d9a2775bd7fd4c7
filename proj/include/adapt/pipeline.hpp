#pragma once

#include <array>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "adapt/error.hpp"
#include "adapt/hparams.hpp"
#include "adapt/ops/finetune.hpp"
#include "adapt/ops/ssl.hpp"
#include "adapt/ops/trans_pn.hpp"
#include "adapt/ops/tune_bn.hpp"

namespace adapt {

inline constexpr std::string_view kPipelineSchema = "map-pipeline/1";

enum class ModuleKind { tune_bn, trans_pn, finetune, pseudo_label, entropy, mean_teacher, fixmatch };

using SlotHP = std::variant<TuneBNHP, TransPNHP, FinetuneHP, PseudoLabelHP, EntropyHP, MeanTeacherHP, FixMatchHP>;

inline constexpr int kSlotCount = 11;

/// Fixed application order of the eleven slots.
inline constexpr std::array<ModuleKind, kSlotCount> kSlotOrder = {
    ModuleKind::tune_bn,      ModuleKind::trans_pn, ModuleKind::tune_bn,  ModuleKind::finetune,
    ModuleKind::tune_bn,      ModuleKind::pseudo_label, ModuleKind::entropy, ModuleKind::mean_teacher,
    ModuleKind::fixmatch,     ModuleKind::tune_bn,  ModuleKind::trans_pn,
};

inline std::string_view module_name(ModuleKind k) {
    switch (k) {
        case ModuleKind::tune_bn: return TuneBNHP::kModule;
        case ModuleKind::trans_pn: return TransPNHP::kModule;
        case ModuleKind::finetune: return FinetuneHP::kModule;
        case ModuleKind::pseudo_label: return PseudoLabelHP::kModule;
        case ModuleKind::entropy: return EntropyHP::kModule;
        case ModuleKind::mean_teacher: return MeanTeacherHP::kModule;
        case ModuleKind::fixmatch: return FixMatchHP::kModule;
    }
    return "?";
}

inline SlotHP default_hp(ModuleKind k) {
    switch (k) {
        case ModuleKind::tune_bn: return TuneBNHP{};
        case ModuleKind::trans_pn: return TransPNHP{};
        case ModuleKind::finetune: return FinetuneHP{};
        case ModuleKind::pseudo_label: return PseudoLabelHP{};
        case ModuleKind::entropy: return EntropyHP{};
        case ModuleKind::mean_teacher: return MeanTeacherHP{};
        case ModuleKind::fixmatch: return FixMatchHP{};
    }
    return TuneBNHP{};
}

struct Slot {
    bool enabled = false;
    SlotHP hp;

    ModuleKind kind() const { return static_cast<ModuleKind>(hp.index()); }
    bool operator==(const Slot&) const = default;
};

/// One point of the configuration space: eleven switchable slots with their
/// hyperparameters. Slot i always holds module kSlotOrder[i].
struct PipelineConfig {
    std::array<Slot, kSlotCount> slots;

    /// All slots off, default hyperparameters.
    static PipelineConfig all_off() {
        PipelineConfig c;
        for (int i = 0; i < kSlotCount; ++i) c.slots[static_cast<std::size_t>(i)] = Slot{false, default_hp(kSlotOrder[static_cast<std::size_t>(i)])};
        return c;
    }

    Slot& slot(int one_based) { return slots.at(static_cast<std::size_t>(one_based - 1)); }
    const Slot& slot(int one_based) const { return slots.at(static_cast<std::size_t>(one_based - 1)); }

    template <typename HP>
    HP& hp(int one_based) { return std::get<HP>(slot(one_based).hp); }

    unsigned switch_mask() const {
        unsigned m = 0;
        for (int i = 0; i < kSlotCount; ++i)
            if (slots[static_cast<std::size_t>(i)].enabled) m |= 1u << i;
        return m;
    }

    bool operator==(const PipelineConfig&) const = default;
};

/// Number of distinct switch patterns of an n-slot pipeline.
inline unsigned long long enumerate_switch_space(int n_slots = kSlotCount) {
    if (n_slots < 0 || n_slots > 63) throw ConfigError("n_slots", "must be within [0, 63]");
    return 1ULL << n_slots;
}

// ---------------------------------------------------------------------------
// Baseline presets

enum class Preset { PN, FT };

inline constexpr int kPresetTuneBNSlot = 1;
inline constexpr int kPresetTransPNSlot = 2;
inline constexpr int kPresetFinetuneSlot = 4;

/// PN: TuneBN + TransPN. FT: TuneBN + Finetune. Every other slot is off.
inline PipelineConfig preset_config(Preset p) {
    auto c = PipelineConfig::all_off();
    c.slot(kPresetTuneBNSlot).enabled = true;
    c.slot(p == Preset::PN ? kPresetTransPNSlot : kPresetFinetuneSlot).enabled = true;
    return c;
}

inline std::string to_string(Preset p) { return p == Preset::PN ? "PN" : "FT"; }

inline std::optional<Preset> parse_preset(std::string_view s) {
    if (s == "PN") return Preset::PN;
    if (s == "FT") return Preset::FT;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Canonical document

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : cfg.slots) {
        nlohmann::json js;
        js["module"] = std::string(module_name(s.kind()));
        js["switch"] = s.enabled ? "on" : "off";
        js["hp"] = std::visit([](const auto& hp) { return hp_to_json(hp); }, s.hp);
        slots.push_back(std::move(js));
    }
    return nlohmann::json{{"schema", std::string(kPipelineSchema)}, {"slots", std::move(slots)}};
}

/// Canonical text: sorted keys, shortest round-trip numbers, one line.
inline std::string encode_config(const PipelineConfig& cfg) { return config_to_json(cfg).dump(); }

inline PipelineConfig config_from_json(const nlohmann::json& doc, const std::string& root = "pipeline") {
    if (!doc.is_object()) throw ConfigError(root, "expected an object");
    for (const auto& [key, _] : doc.items())
        if (key != "schema" && key != "slots") throw ConfigError(root + "." + key, "unknown field");
    if (!doc.contains("schema") || doc.at("schema") != kPipelineSchema)
        throw ConfigError(root + ".schema", "expected \"" + std::string(kPipelineSchema) + "\"");
    if (!doc.contains("slots") || !doc.at("slots").is_array()) throw ConfigError(root + ".slots", "expected an array");
    const auto& js = doc.at("slots");
    PipelineConfig cfg = PipelineConfig::all_off();
    for (int i = 0; i < kSlotCount; ++i) {
        const std::string path = root + ".slots[" + std::to_string(i) + "]";
        if (static_cast<std::size_t>(i) >= js.size()) throw ConfigError(path, "missing slot");
        const auto& s = js[static_cast<std::size_t>(i)];
        if (!s.is_object()) throw ConfigError(path, "expected an object");
        for (const auto& [key, _] : s.items())
            if (key != "module" && key != "switch" && key != "hp") throw ConfigError(path + "." + key, "unknown field");
        const ModuleKind kind = kSlotOrder[static_cast<std::size_t>(i)];
        if (!s.contains("module") || s.at("module") != module_name(kind))
            throw ConfigError(path + ".module", "expected \"" + std::string(module_name(kind)) + "\"");
        if (!s.contains("switch")) throw ConfigError(path + ".switch", "missing field");
        const auto& sw = s.at("switch");
        if (sw != "on" && sw != "off") throw ConfigError(path + ".switch", "expected \"on\" or \"off\"");
        if (!s.contains("hp")) throw ConfigError(path + ".hp", "missing field");
        Slot& slot = cfg.slots[static_cast<std::size_t>(i)];
        slot.enabled = sw == "on";
        const auto& jh = s.at("hp");
        std::visit([&](auto& hp) { hp = hp_from_json<std::decay_t<decltype(hp)>>(jh, path + ".hp"); }, slot.hp);
    }
    if (js.size() > static_cast<std::size_t>(kSlotCount))
        throw ConfigError(root + ".slots[" + std::to_string(kSlotCount) + "]", "pipeline has exactly 11 slots");
    return cfg;
}

inline PipelineConfig decode_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("pipeline", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(doc);
}

inline void validate_config(const PipelineConfig& cfg) {
    for (int i = 0; i < kSlotCount; ++i) {
        const auto& s = cfg.slots[static_cast<std::size_t>(i)];
        const std::string path = "slots[" + std::to_string(i) + "].hp";
        if (s.kind() != kSlotOrder[static_cast<std::size_t>(i)])
            throw ConfigError("slots[" + std::to_string(i) + "].module", "slot holds the wrong module");
        std::visit([&](const auto& hp) { validate_hp(hp, path); }, s.hp);
    }
}

// ---------------------------------------------------------------------------
// Execution

/// Applies one slot's operator. `rng` is the slot's own stream.
inline Model<float> apply_slot(Model<float> model, const AdaptTask& task, const Slot& slot, Rng rng) {
    return std::visit(
        [&](const auto& hp) -> Model<float> {
            using H = std::decay_t<decltype(hp)>;
            if constexpr (std::is_same_v<H, TuneBNHP>) return tune_bn(std::move(model), task, hp, rng);
            else if constexpr (std::is_same_v<H, TransPNHP>) return trans_pn(std::move(model), task, hp);
            else if constexpr (std::is_same_v<H, FinetuneHP>) return finetune(std::move(model), task, hp, rng);
            else if constexpr (std::is_same_v<H, PseudoLabelHP>) return ssl_pseudo_label(std::move(model), task, hp, rng);
            else if constexpr (std::is_same_v<H, EntropyHP>) return ssl_entropy(std::move(model), task, hp, rng);
            else if constexpr (std::is_same_v<H, MeanTeacherHP>) return ssl_mean_teacher(std::move(model), task, hp, rng);
            else return ssl_fixmatch(std::move(model), task, hp, rng);
        },
        slot.hp);
}

/// F' = M_11 o ... o M_1 o F over the enabled slots. Slot k (1-based) draws
/// from derive(seed, k), so disabled slots never shift other slots' streams.
inline Model<float> run_pipeline(Model<float> model, const AdaptTask& task, const PipelineConfig& cfg,
                                 std::uint64_t seed) {
    for (int k = 1; k <= kSlotCount; ++k) {
        const Slot& slot = cfg.slot(k);
        if (!slot.enabled) continue;
        try {
            model = apply_slot(std::move(model), task, slot, Rng(derive(seed, static_cast<std::uint64_t>(k))));
        } catch (const Error& e) {
            throw SlotError(k, std::string(module_name(slot.kind())), e.what());
        }
    }
    return model;
}

}  // namespace adapt
