#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chorder/baselines.hpp"
#include "chorder/data.hpp"
#include "chorder/detectors.hpp"
#include "chorder/scorer.hpp"

namespace chorder {

/// Column order of the printed comparison table.
inline constexpr std::array<const char*, 6> kTableColumns{"RGB", "RBG", "BGR", "BRG", "GBR", "GRB"};

struct GrayMetrics {
    double tau = kDefaultGrayTau;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    size_t true_positive = 0, false_positive = 0, false_negative = 0, true_negative = 0;
    std::vector<double> gray_statistics;
    std::vector<double> color_statistics;
};

struct EvalReport {
    std::string method = "Chanel-Orderer";
    /// Indexed like ChannelPermutation::all(); fractions in [0,1].
    std::array<double, 6> accuracy{};
    std::array<size_t, 6> correct{};
    std::array<size_t, 6> total{};
    double overall = 0.0;
    std::optional<double> bgr_accuracy;
    std::optional<GrayMetrics> gray;

    double column(const std::string& name) const { return accuracy[ChannelPermutation::parse(name).index()]; }
};

using OrderPredictor = std::function<ChannelPermutation(const TriChannelImage&, const MaskStack&)>;

template <class T>
OrderPredictor orderer_predictor(const ScorerParams<T>& sp) {
    return [&sp](const TriChannelImage& im, const MaskStack& m) { return predict_order(score_image(im, m, sp)).permutation; };
}

template <class T>
OrderPredictor softmax_predictor(const SoftmaxModel<T>& model) {
    const auto labels = softmax_labels(model.classes);
    return [&model, labels](const TriChannelImage& im, const MaskStack&) {
        return labels[softmax_classify(im, model).argmax()];
    };
}

template <class T>
OrderPredictor shallow_predictor(const ShallowModel<T>& model) {
    return [&model](const TriChannelImage& im, const MaskStack&) { return shallow_predict(im, model).permutation; };
}

inline std::vector<PermutedSample> expand_all6(const std::vector<Sample>& corpus) {
    std::vector<PermutedSample> out;
    out.reserve(corpus.size() * 6);
    for (const auto& s : corpus)
        for (auto& p : expand_permutations(s, ExpandMode::all6)) out.push_back(std::move(p));
    return out;
}

/// A prediction is correct only if the full layout matches.
inline EvalReport evaluate_ordering(const OrderPredictor& predict, const std::vector<PermutedSample>& items) {
    if (items.empty()) throw ConfigError("evaluation corpus is empty");
    EvalReport r;
    for (const auto& it : items) {
        const int k = it.true_perm.index();
        if (k < 0) throw ConfigError("ordering evaluation needs non-gray samples");
        ++r.total[k];
        if (predict(it.image, it.masks) == it.true_perm) ++r.correct[k];
    }
    size_t correct = 0, total = 0;
    for (int k = 0; k < 6; ++k) {
        r.accuracy[k] = r.total[k] ? static_cast<double>(r.correct[k]) / static_cast<double>(r.total[k]) : 0.0;
        correct += r.correct[k];
        total += r.total[k];
    }
    r.overall = static_cast<double>(correct) / static_cast<double>(total);
    return r;
}

inline EvalReport evaluate_ordering(const OrderPredictor& predict, const std::vector<Sample>& corpus) {
    return evaluate_ordering(predict, expand_all6(corpus));
}

using BgrPredictor = std::function<BgrLabel(const TriChannelImage&)>;

template <class T>
BgrPredictor pair_bgr_predictor(const PairScorerParams<T>& pp) {
    return [&pp](const TriChannelImage& im) { return detect_bgr(im, pp).label; };
}

template <class T>
BgrPredictor softmax_bgr_predictor(const SoftmaxModel<T>& model) {
    if (model.classes != 2) throw ConfigError("RGB/BGR evaluation needs a 2-class softmax model");
    return [&model](const TriChannelImage& im) {
        return softmax_classify(im, model).argmax() == 0 ? BgrLabel::rgb : BgrLabel::bgr;
    };
}

/// Accuracy over the balanced RGB + BGR expansion of `corpus`.
inline double evaluate_bgr(const BgrPredictor& predict, const std::vector<Sample>& corpus) {
    if (corpus.empty()) throw ConfigError("evaluation corpus is empty");
    size_t correct = 0;
    for (const auto& s : corpus) {
        correct += predict(s.image) == BgrLabel::rgb;
        correct += predict(permute_channels(s.image, ChannelPermutation::bgr())) == BgrLabel::bgr;
    }
    return static_cast<double>(correct) / static_cast<double>(2 * corpus.size());
}

// ---------------------------------------------------------------------------
// Near-grayscale detection.

/// Whether small (orderer score spread) or large (softmax entropy) statistics
/// indicate a near-gray image.
enum class GrayRule { below, above };

inline GrayMetrics gray_metrics(std::vector<double> gray_stats, std::vector<double> color_stats, double tau,
                                GrayRule rule = GrayRule::below) {
    if (gray_stats.empty() || color_stats.empty())
        throw ConfigError("F1 is undefined: the near-gray evaluation set needs both classes");
    auto is_gray = [&](double s) { return rule == GrayRule::below ? s < tau : s > tau; };
    GrayMetrics m;
    m.tau = tau;
    for (double s : gray_stats) (is_gray(s) ? m.true_positive : m.false_negative)++;
    for (double s : color_stats) (is_gray(s) ? m.false_positive : m.true_negative)++;
    const double tp = static_cast<double>(m.true_positive);
    const double pred_pos = tp + static_cast<double>(m.false_positive);
    m.precision = pred_pos > 0 ? tp / pred_pos : 0.0;
    m.recall = tp / static_cast<double>(gray_stats.size());
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.gray_statistics = std::move(gray_stats);
    m.color_statistics = std::move(color_stats);
    return m;
}

using GrayStatistic = std::function<double(const TriChannelImage&, const MaskStack&)>;

template <class T>
GrayStatistic orderer_gray_statistic(const ScorerParams<T>& sp) {
    return [&sp](const TriChannelImage& im, const MaskStack& m) { return max_abs_delta(score_image(im, m, sp)); };
}

template <class T>
GrayStatistic softmax_entropy_statistic(const SoftmaxModel<T>& model) {
    return [&model](const TriChannelImage& im, const MaskStack&) { return softmax_entropy(softmax_classify(im, model)); };
}

struct GraySet {
    std::vector<PermutedSample> gray;
    std::vector<Sample> color;
};

/// 50/50 set: every sample appears once polychromatic and once as a
/// grayscale augmentation drawn from `seed`.
inline GraySet make_gray_set(const std::vector<Sample>& corpus, uint64_t seed, const GrayAugmentOptions& opt = {}) {
    GraySet set;
    for (size_t i = 0; i < corpus.size(); ++i) {
        Rng rng = Rng::derive(seed, i);
        set.gray.push_back(grayscale_augment(corpus[i], rng, opt));
        set.color.push_back(corpus[i]);
    }
    return set;
}

struct GrayStatistics {
    std::vector<double> gray, color;
};

inline GrayStatistics gray_statistics(const GrayStatistic& stat, const GraySet& set) {
    GrayStatistics out;
    for (const auto& g : set.gray) out.gray.push_back(stat(g.image, g.masks));
    for (const auto& c : set.color) out.color.push_back(stat(c.image, c.masks));
    return out;
}

inline GrayMetrics evaluate_neargray(const GrayStatistic& stat, const GraySet& set, double tau,
                                     GrayRule rule = GrayRule::below) {
    if (!(tau > 0.0)) throw ConfigError("near-gray threshold must be positive");
    auto s = gray_statistics(stat, set);
    return gray_metrics(std::move(s.gray), std::move(s.color), tau, rule);
}

struct TauSweep {
    double tau = kDefaultGrayTau;
    double f1 = 0.0;
    bool degenerate = false;
};

/// Candidate thresholds are midpoints between consecutive distinct observed
/// statistics; the best F1 wins, ties going to the smaller threshold. With
/// fewer than two distinct values the smallest positive observation (or the
/// smallest positive double) is returned and `degenerate` is set.
inline TauSweep sweep_tau(const std::vector<double>& gray_stats, const std::vector<double>& color_stats,
                          GrayRule rule = GrayRule::below) {
    std::vector<double> all(gray_stats);
    all.insert(all.end(), color_stats.begin(), color_stats.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    TauSweep best;
    if (all.size() < 2) {
        best.degenerate = true;
        best.tau = !all.empty() && all.front() > 0.0 ? all.front() : std::numeric_limits<double>::min();
        if (!gray_stats.empty() && !color_stats.empty()) best.f1 = gray_metrics(gray_stats, color_stats, best.tau, rule).f1;
        return best;
    }
    best.f1 = -1.0;
    for (size_t i = 0; i + 1 < all.size(); ++i) {
        const double tau = 0.5 * (all[i] + all[i + 1]);
        if (!(tau > 0.0)) continue;
        const double f1 = gray_metrics(gray_stats, color_stats, tau, rule).f1;
        if (f1 > best.f1) {
            best.f1 = f1;
            best.tau = tau;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Report formatting.

inline std::string format_percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return buf;
}

/// Aligned table with columns RGB RBG BGR BRG GBR GRB Overall (percentages).
inline std::string format_table(const std::vector<EvalReport>& rows) {
    size_t name_w = 6;
    for (const auto& r : rows) name_w = std::max(name_w, r.method.size());
    std::ostringstream os;
    auto cell = [&](const std::string& s, size_t w) {
        os << ' ' << std::string(w > s.size() ? w - s.size() : 0, ' ') << s << " |";
    };
    os << "| " << "Method" << std::string(name_w - 6, ' ') << " |";
    for (const auto* c : kTableColumns) cell(c, 7);
    cell("Overall", 7);
    os << '\n';
    os << "|" << std::string(name_w + 2, '-') << "|";
    for (size_t i = 0; i < kTableColumns.size() + 1; ++i) os << std::string(9, '-') << "|";
    os << '\n';
    for (const auto& r : rows) {
        os << "| " << r.method << std::string(name_w - r.method.size(), ' ') << " |";
        for (const auto* c : kTableColumns) cell(format_percent(r.column(c)), 7);
        cell(format_percent(r.overall), 7);
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const GrayMetrics& g) {
    return {{"tau", g.tau},
            {"precision", g.precision},
            {"recall", g.recall},
            {"f1", g.f1},
            {"true_positive", g.true_positive},
            {"false_positive", g.false_positive},
            {"false_negative", g.false_negative},
            {"true_negative", g.true_negative},
            {"gray_statistics", g.gray_statistics},
            {"color_statistics", g.color_statistics}};
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["method"] = r.method;
    auto cols = nlohmann::json::object();
    for (const auto& p : ChannelPermutation::all()) {
        const int k = p.index();
        cols[p.name()] = {{"accuracy", r.accuracy[k]}, {"correct", r.correct[k]}, {"total", r.total[k]}};
    }
    j["per_permutation"] = cols;
    j["overall"] = r.overall;
    if (r.bgr_accuracy) j["bgr_accuracy"] = *r.bgr_accuracy;
    if (r.gray) j["near_gray"] = to_json(*r.gray);
    return j;
}

} // namespace chorder
