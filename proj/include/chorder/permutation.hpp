#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "chorder/errors.hpp"

namespace chorder {

enum class Color : uint8_t { R = 0, G = 1, B = 2 };

constexpr char color_char(Color c) noexcept {
    switch (c) {
    case Color::R: return 'R';
    case Color::G: return 'G';
    case Color::B: return 'B';
    }
    return '?';
}

constexpr int color_index(Color c) noexcept { return static_cast<int>(c); }

/// Assignment of storage positions 0,1,2 to color labels. Position k of an
/// image laid out as `labels` holds the `labels[k]` color plane. The GRAY
/// value marks inputs whose three planes are identical and carries no order.
class ChannelPermutation {
public:
    /// Identity layout (RGB).
    constexpr ChannelPermutation() = default;

    constexpr ChannelPermutation(Color a, Color b, Color c) : labels_{a, b, c} {
        if (a == b || a == c || b == c) throw ConfigError("permutation labels must be distinct");
    }

    static constexpr ChannelPermutation gray() {
        ChannelPermutation p;
        p.gray_ = true;
        return p;
    }

    /// The six layouts in canonical order RGB, RBG, GRB, GBR, BRG, BGR.
    static constexpr std::array<ChannelPermutation, 6> all() {
        using enum Color;
        return {ChannelPermutation(R, G, B), ChannelPermutation(R, B, G), ChannelPermutation(G, R, B),
                ChannelPermutation(G, B, R), ChannelPermutation(B, R, G), ChannelPermutation(B, G, R)};
    }

    static constexpr ChannelPermutation rgb() { return {}; }
    static constexpr ChannelPermutation bgr() { return {Color::B, Color::G, Color::R}; }

    static ChannelPermutation parse(std::string_view name) {
        if (name == "GRAY") return gray();
        for (const auto& p : all())
            if (p.name() == name) return p;
        throw ConfigError("unknown channel layout '" + std::string(name) + "'");
    }

    constexpr bool is_gray() const noexcept { return gray_; }
    constexpr Color label(int position) const { return labels_[position]; }
    constexpr const std::array<Color, 3>& labels() const noexcept { return labels_; }

    /// Position at which `c` is stored.
    constexpr int position_of(Color c) const {
        for (int k = 0; k < 3; ++k)
            if (labels_[k] == c) return k;
        return -1;
    }

    /// Index of this layout within all(); -1 for GRAY.
    constexpr int index() const {
        if (gray_) return -1;
        const auto table = all();
        for (int i = 0; i < 6; ++i)
            if (table[i].labels_ == labels_) return i;
        return -1;
    }

    /// Layout reached by applying `inner` to an image that is already laid out
    /// as *this: result[k] = labels[inner[k]].
    constexpr ChannelPermutation then(const ChannelPermutation& inner) const {
        ChannelPermutation out;
        for (int k = 0; k < 3; ++k) out.labels_[k] = labels_[color_index(inner.labels_[k])];
        return out;
    }

    constexpr ChannelPermutation inverse() const {
        ChannelPermutation out;
        for (int k = 0; k < 3; ++k) out.labels_[color_index(labels_[k])] = static_cast<Color>(k);
        return out;
    }

    std::string name() const {
        if (gray_) return "GRAY";
        return {color_char(labels_[0]), color_char(labels_[1]), color_char(labels_[2])};
    }

    constexpr bool operator==(const ChannelPermutation& o) const noexcept {
        return gray_ == o.gray_ && (gray_ || labels_ == o.labels_);
    }

private:
    std::array<Color, 3> labels_{Color::R, Color::G, Color::B};
    bool gray_ = false;
};

} // namespace chorder
