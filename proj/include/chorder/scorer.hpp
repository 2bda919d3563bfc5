#pragma once

// Per-channel scoring: each plane runs through a shared U-Net, the feature map
// is mean-pooled under every class mask, and the pooled object colors are
// weighted by the per-class prior vector alpha.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chorder/image.hpp"
#include "chorder/nn/unet.hpp"
#include "chorder/ranking.hpp"

namespace chorder {

inline constexpr double kPoolEpsilon = 1e-6;

using UNetWidths = std::array<int, 4>;
inline constexpr UNetWidths kPaperWidths{32, 64, 128, 256};
inline constexpr UNetWidths kDeskWidths{8, 16, 32, 64};

template <class T = float>
struct ScorerParams {
    UNetWidths widths{};
    std::vector<std::string> class_vocab;
    nn::ParameterSet<T> params;
    nn::UNet<T> unet;
    size_t alpha = 0;

    /// Fresh parameters: alpha = 1, U-Net weights fan-in uniform from `seed`.
    static ScorerParams create(const UNetWidths& widths, std::vector<std::string> vocab, uint64_t seed) {
        auto s = layout(widths, std::move(vocab));
        Rng rng(seed);
        s.unet.init(s.params, rng);
        auto a = s.params[s.alpha];
        std::fill(a.begin(), a.end(), T(1));
        return s;
    }

    /// Parameter layout with every value zero.
    static ScorerParams layout(const UNetWidths& widths, std::vector<std::string> vocab) {
        if (vocab.empty()) throw ConfigError("class vocabulary must not be empty");
        ScorerParams s;
        s.widths = widths;
        s.class_vocab = std::move(vocab);
        s.unet = nn::UNet<T>(widths, s.params);
        s.alpha = s.params.add("alpha", {static_cast<int>(s.class_vocab.size())});
        return s;
    }

    std::span<const T> prior_weights() const { return params[alpha]; }
};

template <class T>
nn::Tensor<T> plane_tensor(const Plane& p) {
    if (p.empty() || p.size() != static_cast<size_t>(p.height) * p.width) throw InputError("malformed plane");
    nn::Tensor<T> t(1, p.height, p.width);
    std::transform(p.values.begin(), p.values.end(), t.data.begin(), [](float v) { return static_cast<T>(v); });
    return t;
}

/// Intermediate state of one channel's score, kept for the backward pass.
template <class T>
struct ChannelPass {
    typename nn::UNet<T>::Tape tape;
    nn::Tensor<T> feature;
    std::vector<double> pooled;
    double score = 0.0;
};

/// U-Net feature plane F for one channel; inputs are reflect-padded to a
/// multiple of 16 and the output is cropped back to H×W.
template <class T>
nn::Tensor<T> feature_map(const Plane& channel, const ScorerParams<T>& sp,
                          typename nn::UNet<T>::Tape* tape = nullptr) {
    const auto x = plane_tensor<T>(channel);
    const auto padded = nn::reflect_pad(x, nn::UNet<T>::kAlignment);
    return nn::crop(sp.unet.forward(sp.params, padded, tape), channel.height, channel.width);
}

/// c^n = sum(F * M^n) / (sum(M^n) + eps) for every class n.
template <class T>
std::vector<double> masked_mean_pool(const nn::Tensor<T>& feature, const MaskStack& masks) {
    if (feature.channels != 1 || feature.height != masks.height || feature.width != masks.width)
        throw InputError("feature map and masks differ in shape");
    std::vector<double> c(masks.class_count(), 0.0);
    for (size_t n = 0; n < masks.class_count(); ++n) {
        const auto m = masks.mask(n);
        double sum = 0.0, count = 0.0;
        for (size_t i = 0; i < m.size(); ++i) {
            if (m[i]) {
                sum += static_cast<double>(feature.data[i]);
                count += 1.0;
            }
        }
        c[n] = sum / (count + kPoolEpsilon);
    }
    return c;
}

template <class T>
void check_vocab(const ScorerParams<T>& sp, const MaskStack& masks) {
    if (sp.params[sp.alpha].size() != masks.class_count())
        throw ConfigError("prior weight length " + std::to_string(sp.params[sp.alpha].size()) +
                          " differs from mask class count " + std::to_string(masks.class_count()));
}

template <class T>
double prior_inner_product(std::span<const T> alpha, const std::vector<double>& pooled) {
    double s = 0.0;
    for (size_t n = 0; n < pooled.size(); ++n) s += static_cast<double>(alpha[n]) * pooled[n];
    return s;
}

template <class T>
ChannelPass<T> score_channel_pass(const Plane& channel, const MaskStack& masks, const ScorerParams<T>& sp) {
    check_vocab(sp, masks);
    ChannelPass<T> pass;
    pass.feature = feature_map(channel, sp, &pass.tape);
    pass.pooled = masked_mean_pool(pass.feature, masks);
    pass.score = prior_inner_product(sp.prior_weights(), pass.pooled);
    return pass;
}

/// Accumulates d(score)/d(theta, alpha) scaled by `dscore` into `grad`.
template <class T>
void score_channel_backward(const ScorerParams<T>& sp, const MaskStack& masks, const ChannelPass<T>& pass,
                            double dscore, std::span<T> grad) {
    const auto alpha = sp.prior_weights();
    const size_t alpha_off = sp.params.slot(sp.alpha).offset;
    const size_t n_pix = masks.pixel_count();
    std::vector<double> dfeat(n_pix, 0.0);
    for (size_t n = 0; n < masks.class_count(); ++n) {
        grad[alpha_off + n] += static_cast<T>(dscore * pass.pooled[n]);
        const auto m = masks.mask(n);
        size_t count = 0;
        for (auto v : m) count += v;
        const double w = dscore * static_cast<double>(alpha[n]) / (static_cast<double>(count) + kPoolEpsilon);
        if (w == 0.0) continue;
        for (size_t i = 0; i < n_pix; ++i)
            if (m[i]) dfeat[i] += w;
    }
    const auto& out = pass.tape.dec_out.back();
    nn::Tensor<T> d(1, masks.height, masks.width);
    std::transform(dfeat.begin(), dfeat.end(), d.data.begin(), [](double v) { return static_cast<T>(v); });
    sp.unet.backward(sp.params, grad, pass.tape, nn::uncrop(d, out.height, out.width));
}

/// s = alpha^T c with c = masked_mean_pool(feature_map(channel)).
template <class T>
double score_channel(const Plane& channel, const MaskStack& masks, const ScorerParams<T>& sp) {
    check_vocab(sp, masks);
    return prior_inner_product(sp.prior_weights(), masked_mean_pool(feature_map(channel, sp), masks));
}

/// Scores every plane independently with shared parameters and masks.
template <class T>
ScoreTriple score_image(const TriChannelImage& image, const MaskStack& masks, const ScorerParams<T>& sp) {
    image.validate();
    if (image.height() != masks.height || image.width() != masks.width)
        throw InputError("image and masks differ in shape");
    ScoreTriple s;
    for (size_t i = 0; i < 3; ++i) s[i] = score_channel(image[i], masks, sp);
    return s;
}

// ---------------------------------------------------------------------------
// Two-plane scorer for the RGB-versus-BGR detector.

inline const std::vector<int> kPairWidths{16, 32, 64};

template <class T = float>
struct PairScorerParams {
    std::vector<int> widths;
    nn::ParameterSet<T> params;
    nn::ConvClassifier<T> net;

    static PairScorerParams layout(std::vector<int> widths = kPairWidths) {
        PairScorerParams p;
        p.widths = widths;
        p.net = nn::ConvClassifier<T>(2, std::move(widths), 1, 1, false, p.params, "pair");
        return p;
    }

    static PairScorerParams create(uint64_t seed, std::vector<int> widths = kPairWidths) {
        auto p = layout(std::move(widths));
        Rng rng(seed);
        p.net.init(p.params, rng);
        return p;
    }
};

template <class T>
nn::Tensor<T> stack_planes(const Plane& a, const Plane& b) {
    if (a.height != b.height || a.width != b.width) throw InputError("pair planes differ in shape");
    return nn::concat_channels(plane_tensor<T>(a), plane_tensor<T>(b));
}

template <class T>
double score_pair(const nn::Tensor<T>& pair, const PairScorerParams<T>& pp,
                  typename nn::ConvClassifier<T>::Tape* tape = nullptr) {
    if (pair.channels != 2) throw InputError("pair scorer takes exactly 2 planes");
    return static_cast<double>(pp.net.forward(pp.params, pair, tape)[0]);
}

template <class T>
double score_pair(const Plane& first, const Plane& second, const PairScorerParams<T>& pp) {
    return score_pair(stack_planes<T>(first, second), pp);
}

} // namespace chorder
