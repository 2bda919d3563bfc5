#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "chorder/image.hpp"
#include "chorder/permutation.hpp"
#include "chorder/random.hpp"
#include "chorder/ranking.hpp"

namespace chorder {

/// Image in ground-truth RGB order with its class masks.
struct Sample {
    TriChannelImage image;
    MaskStack masks;
    std::string id;
};

struct PermutedSample {
    TriChannelImage image;
    ChannelPermutation true_perm;
    PairTargets targets;
    MaskStack masks;
    std::string id;
};

/// Output plane k is input plane labels[k] (as an index), so an RGB input
/// comes out laid out as `perm`.
inline TriChannelImage permute_channels(const TriChannelImage& image, const ChannelPermutation& perm) {
    if (perm.is_gray()) throw ConfigError("cannot permute by the GRAY marker");
    TriChannelImage out;
    for (int k = 0; k < 3; ++k) out.planes[k] = image.planes[color_index(perm.label(k))];
    return out;
}

inline PermutedSample make_permuted(const Sample& s, const ChannelPermutation& perm) {
    return {permute_channels(s.image, perm), perm, pair_targets(perm), s.masks, s.id};
}

enum class ExpandMode { all6, rgb_bgr, single_random };

inline std::vector<PermutedSample> expand_permutations(const Sample& s, ExpandMode mode, Rng* rng = nullptr) {
    std::vector<PermutedSample> out;
    switch (mode) {
    case ExpandMode::all6:
        for (const auto& p : ChannelPermutation::all()) out.push_back(make_permuted(s, p));
        break;
    case ExpandMode::rgb_bgr:
        out.push_back(make_permuted(s, ChannelPermutation::rgb()));
        out.push_back(make_permuted(s, ChannelPermutation::bgr()));
        break;
    case ExpandMode::single_random: {
        if (!rng) throw ConfigError("single_random expansion needs a generator");
        out.push_back(make_permuted(s, ChannelPermutation::all()[rng->integer(0, 5)]));
        break;
    }
    }
    return out;
}

inline float quantize8(double v) {
    return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
}

inline Plane luminance(const TriChannelImage& rgb) {
    Plane l(rgb.height(), rgb.width());
    for (size_t i = 0; i < l.size(); ++i)
        l.values[i] = quantize8(0.299 * rgb[0].values[i] + 0.587 * rgb[1].values[i] + 0.114 * rgb[2].values[i]);
    return l;
}

struct GrayAugmentOptions {
    double patch_probability = 0.5;
    double max_patch_fraction = 0.03;
};

/// Replaces the planes by luminance; optionally keeps the original colors
/// inside one small rectangle. Targets are all 1/2.
inline PermutedSample grayscale_augment(const Sample& s, Rng& rng, const GrayAugmentOptions& opt = {}) {
    const Plane l = luminance(s.image);
    TriChannelImage img(l, l, l);
    if (opt.patch_probability > 0.0 && rng.bernoulli(opt.patch_probability)) {
        const int H = img.height(), W = img.width();
        const double frac = rng.uniform(0.25, 1.0) * opt.max_patch_fraction;
        const double aspect = rng.uniform(0.5, 2.0);
        const double area = frac * H * W;
        const int ph = std::clamp(static_cast<int>(std::sqrt(area * aspect)), 1, H);
        const int pw = std::clamp(static_cast<int>(area / std::max(ph, 1)), 1, W);
        const int y0 = rng.integer(0, H - ph), x0 = rng.integer(0, W - pw);
        for (int y = y0; y < y0 + ph; ++y)
            for (int x = x0; x < x0 + pw; ++x)
                for (int c = 0; c < 3; ++c) img[c].at(y, x) = s.image[c].at(y, x);
    }
    return {std::move(img), ChannelPermutation::gray(), PairTargets{}, s.masks, s.id + "#gray"};
}

// ---------------------------------------------------------------------------
// Synthetic corpus with class-conditional colors and exact masks.

struct ClassColor {
    std::string name;
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    double jitter = 0.04;            // per-channel std of the per-image color
    double brightness_jitter = 0.05; // std of a shift shared by all channels
};

struct SynthSpec {
    int height = 64;
    int width = 64;
    std::vector<ClassColor> palette = default_palette();
    int min_blobs = 1;
    int max_blobs = 3;
    double sky_probability = 0.9;
    double ground_probability = 0.9;
    double pixel_noise = 0.02;
    uint64_t seed = 1;

    /// Class order: sky, vegetation, skin, backdrop.
    static std::vector<ClassColor> default_palette() {
        return {{"sky", {0.45, 0.65, 0.95}, 0.04, 0.05},
                {"vegetation", {0.25, 0.60, 0.25}, 0.04, 0.05},
                {"skin", {0.85, 0.65, 0.50}, 0.04, 0.05},
                {"backdrop", {0.50, 0.50, 0.50}, 0.02, 0.15}};
    }

    std::vector<std::string> vocab() const {
        std::vector<std::string> v;
        for (const auto& c : palette) v.push_back(c.name);
        return v;
    }

    int class_index(const std::string& name) const {
        for (size_t i = 0; i < palette.size(); ++i)
            if (palette[i].name == name) return static_cast<int>(i);
        return -1;
    }

    void validate() const {
        if (height < 1 || width < 1) throw ConfigError("synthetic image size must be positive");
        if (palette.empty() || palette.size() > 255) throw ConfigError("palette must hold 1..255 classes");
        for (const auto& c : palette)
            for (double m : c.mean)
                if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("palette mean outside [0,1] for " + c.name);
        if (min_blobs < 0 || max_blobs < min_blobs) throw ConfigError("invalid blob count range");
    }
};

inline std::string synthetic_id(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%06zu", index);
    return buf;
}

namespace detail {

inline int pick_class(const SynthSpec& spec, const char* name, int fallback) {
    const int i = spec.class_index(name);
    return i >= 0 ? i : fallback;
}

} // namespace detail

/// Sample `index` of the corpus defined by `spec`. Each index draws from its
/// own stream, so samples can be produced in any order.
inline Sample generate_synthetic_sample(const SynthSpec& spec, size_t index) {
    const int H = spec.height, W = spec.width;
    const int n_classes = static_cast<int>(spec.palette.size());
    Rng rng = Rng::derive(spec.seed, index);

    const int backdrop = detail::pick_class(spec, "backdrop", n_classes - 1);
    const int sky = detail::pick_class(spec, "sky", -1);
    const int ground = detail::pick_class(spec, "vegetation", -1);
    const int skin = detail::pick_class(spec, "skin", -1);

    std::vector<uint8_t> labels(static_cast<size_t>(H) * W, static_cast<uint8_t>(backdrop));

    auto wavy_boundary = [&](double base) {
        const double amp = rng.uniform(0.0, 0.05 * H);
        const double period = rng.uniform(0.5, 1.5) * W;
        const double phase = rng.uniform(0.0, 6.283185307179586);
        std::vector<double> b(W);
        for (int x = 0; x < W; ++x) b[x] = base + amp * std::sin(6.283185307179586 * x / period + phase);
        return b;
    };

    if (sky >= 0 && rng.bernoulli(spec.sky_probability)) {
        const auto edge = wavy_boundary(H * rng.uniform(0.2, 0.45));
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (y < edge[x]) labels[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(sky);
    }
    if (ground >= 0 && rng.bernoulli(spec.ground_probability)) {
        const auto edge = wavy_boundary(H * rng.uniform(0.6, 0.8));
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (y >= edge[x]) labels[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(ground);
    }
    if (skin >= 0) {
        const int blobs = rng.integer(spec.min_blobs, spec.max_blobs);
        for (int b = 0; b < blobs; ++b) {
            const double cy = rng.uniform(0.15, 0.85) * H, cx = rng.uniform(0.1, 0.9) * W;
            const double ry = rng.uniform(0.08, 0.2) * H, rx = rng.uniform(0.08, 0.2) * W;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
                    if (dy * dy + dx * dx <= 1.0) labels[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(skin);
                }
        }
    }

    std::vector<std::array<double, 3>> colors(n_classes);
    for (int k = 0; k < n_classes; ++k) {
        const auto& pc = spec.palette[k];
        const double shift = rng.normal(0.0, pc.brightness_jitter);
        for (int c = 0; c < 3; ++c) colors[k][c] = pc.mean[c] + shift + rng.normal(0.0, pc.jitter);
    }

    Sample s;
    s.id = synthetic_id(index);
    s.image = TriChannelImage(H, W);
    s.masks = MaskStack(H, W, spec.vocab());
    for (size_t i = 0; i < labels.size(); ++i) {
        const int k = labels[i];
        s.masks.masks[k][i] = 1;
        for (int c = 0; c < 3; ++c)
            s.image[c].values[i] = quantize8(colors[k][c] + rng.normal(0.0, spec.pixel_noise));
    }
    return s;
}

inline std::vector<Sample> generate_synthetic(const SynthSpec& spec, size_t count) {
    spec.validate();
    if (count < 1) throw ConfigError("synthetic corpus needs count >= 1");
    std::vector<Sample> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.push_back(generate_synthetic_sample(spec, i));
    return out;
}

// ---------------------------------------------------------------------------
// Fixed 80/10/10 split by id hash.

enum class Split { train, val, test, all };

inline Split split_of(const std::string& id) {
    const auto bucket = stable_hash(id) % 10;
    if (bucket < 8) return Split::train;
    return bucket == 8 ? Split::val : Split::test;
}

inline std::vector<Sample> select_split(const std::vector<Sample>& corpus, Split split) {
    if (split == Split::all) return corpus;
    std::vector<Sample> out;
    for (const auto& s : corpus)
        if (split_of(s.id) == split) out.push_back(s);
    return out;
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    if (s == "all") return Split::all;
    throw ConfigError("unknown split '" + s + "'");
}

} // namespace chorder
