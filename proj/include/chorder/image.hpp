#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chorder/errors.hpp"

namespace chorder {

/// A single H×W intensity plane, row-major.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<float> values;

    Plane() = default;
    Plane(int h, int w, float fill = 0.0f) : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {}

    size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }

    float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }

    bool operator==(const Plane&) const = default;
};

/// Three planes of equal size with intensities in [0,1]. Plane order is the
/// storage order of the image, which is not necessarily R,G,B.
struct TriChannelImage {
    std::array<Plane, 3> planes;

    TriChannelImage() = default;
    TriChannelImage(int h, int w) : planes{Plane(h, w), Plane(h, w), Plane(h, w)} {}
    TriChannelImage(Plane p0, Plane p1, Plane p2) : planes{std::move(p0), std::move(p1), std::move(p2)} { validate(); }

    int height() const noexcept { return planes[0].height; }
    int width() const noexcept { return planes[0].width; }
    size_t pixel_count() const noexcept { return planes[0].size(); }

    Plane& operator[](size_t i) { return planes[i]; }
    const Plane& operator[](size_t i) const { return planes[i]; }

    void validate() const {
        for (const auto& p : planes) {
            if (p.height != planes[0].height || p.width != planes[0].width ||
                p.size() != static_cast<size_t>(p.height) * p.width)
                throw InputError("image planes must share one H×W shape");
        }
        if (planes[0].empty()) throw InputError("image is empty");
    }

    bool operator==(const TriChannelImage&) const = default;
};

/// N binary masks, one per semantic class, aligned with the image grid.
/// Masks may overlap or leave pixels uncovered.
struct MaskStack {
    int height = 0;
    int width = 0;
    std::vector<std::string> class_vocab;
    std::vector<std::vector<uint8_t>> masks;

    MaskStack() = default;
    MaskStack(int h, int w, std::vector<std::string> vocab)
        : height(h), width(w), class_vocab(std::move(vocab)),
          masks(class_vocab.size(), std::vector<uint8_t>(static_cast<size_t>(h) * w, 0)) {}

    size_t class_count() const noexcept { return masks.size(); }
    size_t pixel_count() const noexcept { return static_cast<size_t>(height) * width; }

    std::span<const uint8_t> mask(size_t n) const { return masks[n]; }

    void validate() const {
        if (masks.empty()) throw InputError("mask stack needs at least one class");
        if (masks.size() != class_vocab.size()) throw InputError("mask count differs from vocabulary length");
        for (const auto& m : masks) {
            if (m.size() != pixel_count()) throw InputError("mask size differs from H×W");
            for (auto v : m)
                if (v > 1) throw InputError("mask entries must be 0 or 1");
        }
    }

    /// Builds one mask per class from an indexed label map where pixel value k
    /// (1-based) selects class k and 0 is unlabeled background.
    static MaskStack from_label_map(int h, int w, std::span<const uint8_t> labels,
                                    std::vector<std::string> vocab) {
        if (labels.size() != static_cast<size_t>(h) * w) throw InputError("label map size differs from H×W");
        MaskStack stack(h, w, std::move(vocab));
        for (size_t i = 0; i < labels.size(); ++i) {
            const auto k = labels[i];
            if (k == 0) continue;
            if (k > stack.class_count())
                throw InputError("label " + std::to_string(k) + " outside class vocabulary");
            stack.masks[k - 1][i] = 1;
        }
        return stack;
    }

    bool operator==(const MaskStack&) const = default;
};

} // namespace chorder
