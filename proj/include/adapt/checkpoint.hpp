#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adapt/error.hpp"
#include "adapt/model.hpp"

namespace adapt {

inline constexpr std::string_view kModelSchema = "map-model/1";

namespace base64 {

inline constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::vector<std::uint8_t> decode(std::string_view text) {
    std::array<int, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;
    if (text.size() % 4 != 0) throw ConfigError("", "base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = table[static_cast<unsigned char>(c)];
            if (d < 0 || pad) throw ConfigError("", "base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
    }
    return out;
}

}  // namespace base64

namespace detail {

static_assert(sizeof(float) == 4);

inline std::string encode_floats(std::span<const float> values) {
    std::vector<std::uint8_t> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return base64::encode(bytes);
}

inline std::vector<float> decode_floats(const std::string& text, std::size_t expected, const std::string& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = base64::decode(text);
    } catch (const ConfigError& e) {
        throw ConfigError(path, e.what());
    }
    if (bytes.size() != expected * 4)
        throw ConfigError(path, "expected " + std::to_string(expected) + " float32 values, got " +
                                    std::to_string(bytes.size()) + " bytes");
    std::vector<float> out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
        out[i] = std::bit_cast<float>(bits);
        if (!std::isfinite(out[i])) throw ConfigError(path, "non-finite value");
    }
    return out;
}

template <typename X>
std::string encode_tensor(const X& x) {
    return encode_floats(std::span<const float>(x.data(), static_cast<std::size_t>(x.size())));
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key, "missing field");
    return j.at(key);
}

inline Eigen::Index get_dim(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = field(j, key, path);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path + "." + key, "expected a count");
    return static_cast<Eigen::Index>(v.get<long long>());
}

inline float get_real(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& v = field(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<float>();
}

inline Matrix read_matrix(const nlohmann::json& j, const char* key, Eigen::Index rows, Eigen::Index cols,
                          const std::string& path) {
    const auto& v = field(j, key, path);
    if (!v.is_string()) throw ConfigError(path + "." + key, "expected base64 text");
    auto values = decode_floats(v.get<std::string>(), static_cast<std::size_t>(rows * cols), path + "." + key);
    Matrix m(rows, cols);
    std::memcpy(m.data(), values.data(), values.size() * sizeof(float));
    return m;
}

inline Vector read_vector(const nlohmann::json& j, const char* key, Eigen::Index n, const std::string& path) {
    Matrix m = read_matrix(j, key, n, 1, path);
    return Eigen::Map<Vector>(m.data(), n);
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model<float>& model) {
    using nlohmann::json;
    json doc;
    doc["schema"] = std::string(kModelSchema);
    doc["input_width"] = model.input_width;
    json layers = json::array();
    for (const auto& l : model.encoder) {
        json jl;
        jl["in"] = l.in_width();
        jl["out"] = l.out_width();
        jl["relu"] = l.relu;
        jl["weight"] = detail::encode_tensor(l.weight);
        jl["bias"] = detail::encode_tensor(l.bias);
        if (l.bn) {
            jl["batch_norm"] = json{{"momentum", l.bn->momentum},
                                    {"running_mean", detail::encode_tensor(l.bn->running_mean)},
                                    {"running_var", detail::encode_tensor(l.bn->running_var)},
                                    {"gamma", detail::encode_tensor(l.bn->gamma)},
                                    {"beta", detail::encode_tensor(l.bn->beta)}};
        } else {
            jl["batch_norm"] = nullptr;
        }
        layers.push_back(std::move(jl));
    }
    doc["encoder"] = std::move(layers);
    doc["power_scale"] = model.power_scale ? json{{"p", model.power_scale->p}} : json(nullptr);
    std::visit(
        [&](const auto& h) {
            using H = std::decay_t<decltype(h)>;
            if constexpr (std::is_same_v<H, LinearHead<float>>) {
                doc["head"] = json{{"kind", "linear"},
                                   {"embed", h.weight.rows()},
                                   {"classes", h.weight.cols()},
                                   {"weight", detail::encode_tensor(h.weight)},
                                   {"bias", detail::encode_tensor(h.bias)}};
            } else {
                doc["head"] = json{{"kind", "prototype"},
                                   {"embed", h.prototypes.cols()},
                                   {"classes", h.prototypes.rows()},
                                   {"prototypes", detail::encode_tensor(h.prototypes)},
                                   {"tau", h.tau}};
            }
        },
        model.head);
    return doc;
}

inline Model<float> model_from_json(const nlohmann::json& doc) {
    using detail::field;
    const std::string root = "model";
    if (!doc.is_object()) throw ConfigError(root, "expected an object");
    const auto& schema = field(doc, "schema", root);
    if (!schema.is_string() || schema.get<std::string>() != kModelSchema)
        throw ConfigError(root + ".schema", "expected \"" + std::string(kModelSchema) + "\"");
    Model<float> m;
    m.input_width = detail::get_dim(doc, "input_width", root);
    const auto& layers = field(doc, "encoder", root);
    if (!layers.is_array()) throw ConfigError(root + ".encoder", "expected an array");
    Eigen::Index width = m.input_width;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string path = root + ".encoder[" + std::to_string(i) + "]";
        const auto& jl = layers[i];
        const auto in = detail::get_dim(jl, "in", path);
        const auto out = detail::get_dim(jl, "out", path);
        if (in != width) throw ConfigError(path + ".in", "does not match previous layer width");
        DenseLayer<float> l;
        l.weight = detail::read_matrix(jl, "weight", in, out, path);
        l.bias = detail::read_vector(jl, "bias", out, path);
        const auto& relu = field(jl, "relu", path);
        if (!relu.is_boolean()) throw ConfigError(path + ".relu", "expected a boolean");
        l.relu = relu.get<bool>();
        const auto& jb = field(jl, "batch_norm", path);
        if (!jb.is_null()) {
            const std::string bp = path + ".batch_norm";
            BatchNorm<float> bn;
            bn.momentum = detail::get_real(jb, "momentum", bp);
            bn.running_mean = detail::read_vector(jb, "running_mean", out, bp);
            bn.running_var = detail::read_vector(jb, "running_var", out, bp);
            bn.gamma = detail::read_vector(jb, "gamma", out, bp);
            bn.beta = detail::read_vector(jb, "beta", out, bp);
            if ((bn.running_var.array() < 0.0f).any()) throw ConfigError(bp + ".running_var", "negative variance");
            l.bn = std::move(bn);
        }
        width = out;
        m.encoder.push_back(std::move(l));
    }
    const auto& ps = field(doc, "power_scale", root);
    if (!ps.is_null()) m.power_scale = PowerScale<float>{detail::get_real(ps, "p", root + ".power_scale")};
    const auto& jh = field(doc, "head", root);
    const std::string hp = root + ".head";
    const auto& kind = field(jh, "kind", hp);
    const auto embed = detail::get_dim(jh, "embed", hp);
    const auto classes = detail::get_dim(jh, "classes", hp);
    if (embed != width) throw ConfigError(hp + ".embed", "does not match encoder output width");
    if (kind == "linear") {
        m.head = LinearHead<float>{detail::read_matrix(jh, "weight", embed, classes, hp),
                                   detail::read_vector(jh, "bias", classes, hp)};
    } else if (kind == "prototype") {
        m.head = PrototypeHead<float>{detail::read_matrix(jh, "prototypes", classes, embed, hp),
                                      detail::get_real(jh, "tau", hp)};
    } else {
        throw ConfigError(hp + ".kind", "expected \"linear\" or \"prototype\"");
    }
    return m;
}

inline std::string encode_model(const Model<float>& model) { return model_to_json(model).dump(1) + "\n"; }

inline Model<float> decode_model(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("model", std::string("malformed JSON: ") + e.what());
    }
    return model_from_json(doc);
}

inline void save_model(const Model<float>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << encode_model(model);
}

inline Model<float> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open checkpoint");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_model(ss.str());
}

}  // namespace adapt
