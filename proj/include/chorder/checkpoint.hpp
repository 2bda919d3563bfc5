#pragma once

// Versioned model container.
//
// Layout (all integers little-endian):
//   8 bytes   magic "CHORDCKP"
//   u32       format version
//   u64       header length N
//   N bytes   UTF-8 JSON header: model kind, metadata and an array table
//             [{name, shape, offset, count}] with offsets relative to the
//             start of the data section
//   ...       float32 data for every array, in declaration order

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "chorder/baselines.hpp"
#include "chorder/errors.hpp"
#include "chorder/nn/parameters.hpp"
#include "chorder/ranking.hpp"
#include "chorder/scorer.hpp"

namespace chorder {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'H', 'O', 'R', 'D', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

enum class ModelKind { orderer, bgr, softmax6, softmax2, shallow };

inline std::string kind_name(ModelKind k) {
    switch (k) {
    case ModelKind::orderer: return "orderer";
    case ModelKind::bgr: return "bgr";
    case ModelKind::softmax6: return "softmax6";
    case ModelKind::softmax2: return "softmax2";
    case ModelKind::shallow: return "shallow";
    }
    return "unknown";
}

inline ModelKind parse_kind(const std::string& s) {
    for (auto k : {ModelKind::orderer, ModelKind::bgr, ModelKind::softmax6, ModelKind::softmax2, ModelKind::shallow})
        if (kind_name(k) == s) return k;
    throw ConfigError("unknown model kind '" + s + "'");
}

struct Checkpoint {
    ModelKind kind = ModelKind::orderer;
    nlohmann::json meta = nlohmann::json::object();
    nn::ParameterSet<float> params;

    bool operator==(const Checkpoint& o) const { return kind == o.kind && meta == o.meta && params == o.params; }
};

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["kind"] = kind_name(ckpt.kind);
    header["meta"] = ckpt.meta;
    auto arrays = nlohmann::json::array();
    for (const auto& s : ckpt.params.slots())
        arrays.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset * sizeof(float)}, {"count", s.size}});
    header["arrays"] = arrays;
    const std::string text = header.dump();

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write checkpoint " + path.string());
        const uint32_t version = kCheckpointVersion;
        const uint64_t len = text.size();
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        const auto& v = ckpt.params.values();
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
        if (!out) throw LoadError("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint " + path.string());
    char magic[8];
    uint32_t version = 0;
    uint64_t len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw LoadError(path.string() + " is not a checkpoint");
    if (version != kCheckpointVersion)
        throw LoadError("unsupported checkpoint version " + std::to_string(version));
    if (len > (1u << 28)) throw LoadError("checkpoint header too large");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw LoadError("truncated checkpoint header");

    Checkpoint ckpt;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        ckpt.kind = parse_kind(header.at("kind").get<std::string>());
        ckpt.meta = header.at("meta");
        for (const auto& a : header.at("arrays")) {
            const auto idx = ckpt.params.add(a.at("name").get<std::string>(), a.at("shape").get<std::vector<int>>());
            const auto& slot = ckpt.params.slot(idx);
            if (slot.size != a.at("count").get<size_t>() || slot.offset * sizeof(float) != a.at("offset").get<size_t>())
                throw LoadError("inconsistent array table entry for " + slot.name);
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed checkpoint header: " + std::string(e.what()));
    } catch (const ConfigError& e) {
        throw LoadError(std::string("malformed checkpoint header: ") + e.what());
    }
    auto& v = ckpt.params.values();
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw LoadError("truncated checkpoint data");
    return ckpt;
}

namespace detail {

/// Copies checkpoint arrays into a freshly declared layout, checking that
/// names and shapes agree one-to-one.
template <class T>
void adopt_params(const nn::ParameterSet<float>& stored, nn::ParameterSet<T>& layout) {
    if (stored.slots().size() != layout.slots().size()) throw LoadError("checkpoint array count does not match model");
    for (size_t i = 0; i < stored.slots().size(); ++i) {
        const auto& a = stored.slot(i);
        const auto& b = layout.slot(i);
        if (a.name != b.name || a.shape != b.shape)
            throw LoadError("checkpoint array '" + a.name + "' does not match model array '" + b.name + "'");
    }
    for (size_t i = 0; i < stored.size(); ++i) layout.values()[i] = static_cast<T>(stored.values()[i]);
}

inline void expect_kind(const Checkpoint& c, std::initializer_list<ModelKind> kinds) {
    for (auto k : kinds)
        if (c.kind == k) return;
    throw ConfigError("checkpoint holds a '" + kind_name(c.kind) + "' model, which this task cannot use");
}

} // namespace detail

inline nlohmann::json ranking_to_json(const RankingConfig& r) {
    return {{"temperature", r.temperature}, {"link", link_name(r.link)}};
}

inline RankingConfig ranking_from_json(const nlohmann::json& j) {
    RankingConfig r;
    r.temperature = j.at("temperature").get<double>();
    r.link = parse_link(j.at("link").get<std::string>());
    return r;
}

inline Checkpoint make_checkpoint(const ScorerParams<float>& sp, const RankingConfig& ranking, nlohmann::json extra = {}) {
    Checkpoint c;
    c.kind = ModelKind::orderer;
    c.meta = extra.is_object() ? std::move(extra) : nlohmann::json::object();
    c.meta["class_vocab"] = sp.class_vocab;
    c.meta["widths"] = sp.widths;
    c.meta["ranking"] = ranking_to_json(ranking);
    c.params = sp.params;
    return c;
}

inline ScorerParams<float> scorer_from_checkpoint(const Checkpoint& c) {
    detail::expect_kind(c, {ModelKind::orderer});
    auto sp = ScorerParams<float>::layout(c.meta.at("widths").get<UNetWidths>(),
                                          c.meta.at("class_vocab").get<std::vector<std::string>>());
    detail::adopt_params(c.params, sp.params);
    return sp;
}

inline Checkpoint make_checkpoint(const PairScorerParams<float>& pp, const RankingConfig& ranking,
                                  nlohmann::json extra = {}) {
    Checkpoint c;
    c.kind = ModelKind::bgr;
    c.meta = extra.is_object() ? std::move(extra) : nlohmann::json::object();
    c.meta["widths"] = pp.widths;
    c.meta["ranking"] = ranking_to_json(ranking);
    c.params = pp.params;
    return c;
}

inline PairScorerParams<float> pair_scorer_from_checkpoint(const Checkpoint& c) {
    detail::expect_kind(c, {ModelKind::bgr});
    auto pp = PairScorerParams<float>::layout(c.meta.at("widths").get<std::vector<int>>());
    detail::adopt_params(c.params, pp.params);
    return pp;
}

inline Checkpoint make_checkpoint(const SoftmaxModel<float>& m, nlohmann::json extra = {}) {
    Checkpoint c;
    c.kind = m.classes == 6 ? ModelKind::softmax6 : ModelKind::softmax2;
    c.meta = extra.is_object() ? std::move(extra) : nlohmann::json::object();
    c.meta["widths"] = m.widths;
    c.meta["classes"] = m.classes;
    c.params = m.params;
    return c;
}

inline SoftmaxModel<float> softmax_from_checkpoint(const Checkpoint& c) {
    detail::expect_kind(c, {ModelKind::softmax6, ModelKind::softmax2});
    auto m = SoftmaxModel<float>::layout(c.meta.at("classes").get<int>(), c.meta.at("widths").get<UNetWidths>());
    detail::adopt_params(c.params, m.params);
    return m;
}

inline Checkpoint make_checkpoint(const ShallowModel<float>& m, nlohmann::json extra = {}) {
    Checkpoint c;
    c.kind = ModelKind::shallow;
    c.meta = extra.is_object() ? std::move(extra) : nlohmann::json::object();
    c.meta["bins"] = m.bins;
    c.meta["hidden"] = m.hidden;
    c.params = m.params;
    return c;
}

inline ShallowModel<float> shallow_from_checkpoint(const Checkpoint& c) {
    detail::expect_kind(c, {ModelKind::shallow});
    auto m = ShallowModel<float>::layout(c.meta.at("bins").get<int>(), c.meta.at("hidden").get<int>());
    detail::adopt_params(c.params, m.params);
    return m;
}

} // namespace chorder
