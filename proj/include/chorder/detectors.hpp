#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "chorder/data.hpp"
#include "chorder/scorer.hpp"

namespace chorder {

inline constexpr double kDefaultGrayTau = 0.4;

struct OrderPrediction {
    ChannelPermutation permutation;
    ScoreTriple scores;
    double max_abs_delta = 0.0;
    bool tie_flag = false;
};

inline double max_abs_delta(const ScoreTriple& s) {
    return std::max({std::abs(s[0] - s[1]), std::abs(s[0] - s[2]), std::abs(s[1] - s[2])});
}

/// Highest score is labeled R, lowest B, the remaining plane G. Equal scores
/// keep position order (earlier position takes the earlier color) and raise
/// tie_flag.
inline OrderPrediction predict_order(const ScoreTriple& scores) {
    if (!scores.finite()) throw std::domain_error("predict_order: non-finite score");
    std::array<int, 3> rank{0, 1, 2};
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    std::array<Color, 3> labels{};
    for (int r = 0; r < 3; ++r) labels[rank[r]] = static_cast<Color>(r);
    OrderPrediction out;
    out.permutation = ChannelPermutation(labels[0], labels[1], labels[2]);
    out.scores = scores;
    out.max_abs_delta = max_abs_delta(scores);
    out.tie_flag = scores[0] == scores[1] || scores[0] == scores[2] || scores[1] == scores[2];
    return out;
}

/// Rearranges planes so that they read R, G, B under the predicted layout.
inline TriChannelImage restore_rgb(const TriChannelImage& image, const OrderPrediction& pred) {
    return permute_channels(image, pred.permutation.inverse());
}

enum class BgrLabel : uint8_t { rgb, bgr };

struct BgrDecision {
    BgrLabel label = BgrLabel::bgr;
    double s12 = 0.0;
    double s13 = 0.0;
};

/// RGB iff s12 > s13; an exact tie is labeled BGR.
inline BgrDecision decide_bgr(double s12, double s13) {
    return {s12 > s13 ? BgrLabel::rgb : BgrLabel::bgr, s12, s13};
}

template <class T>
BgrDecision detect_bgr(const TriChannelImage& image, const PairScorerParams<T>& pp) {
    image.validate();
    return decide_bgr(score_pair(image[0], image[1], pp), score_pair(image[0], image[2], pp));
}

struct GrayDecision {
    bool is_near_gray = false;
    double statistic = 0.0;
    double tau = kDefaultGrayTau;
};

/// Near-grayscale iff max |s_i - s_j| < tau.
inline GrayDecision detect_near_gray(const ScoreTriple& scores, double tau = kDefaultGrayTau) {
    if (!(tau > 0.0)) throw ConfigError("near-gray threshold must be positive");
    const double stat = max_abs_delta(scores);
    return {stat < tau, stat, tau};
}

} // namespace chorder
