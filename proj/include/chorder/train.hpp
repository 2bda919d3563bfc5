#pragma once

// Training loops for the channel scorer, the RGB/BGR pair scorer and both
// baselines. All share one driver: per-epoch shuffling, mini-batches with the
// gradient averaged over items, Adam, and lr = initial_lr * decay^epoch.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chorder/baselines.hpp"
#include "chorder/checkpoint.hpp"
#include "chorder/data.hpp"
#include "chorder/nn/adam.hpp"
#include "chorder/scorer.hpp"

namespace chorder {

struct TrainConfig {
    int batch_size = 48;
    int epochs = 100;
    double initial_lr = 1e-3;
    double lr_decay = 0.98;
    uint64_t seed = 0;
    RankingConfig ranking;
    UNetWidths widths = kPaperWidths;
    /// Share of scorer training items replaced by grayscale augmentations.
    double gray_fraction = 0.1;
    GrayAugmentOptions gray_augment;
    std::vector<int> pair_widths = kPairWidths;
    int histogram_bins = kDefaultHistogramBins;
    int shallow_hidden = kShallowHidden;

    /// CPU-sized defaults: 8/16/32/64 widths, batch 16, 20 epochs.
    static TrainConfig desk() {
        TrainConfig c;
        c.widths = kDeskWidths;
        c.batch_size = 16;
        c.epochs = 20;
        return c;
    }

    double lr_at(int epoch) const { return initial_lr * std::pow(lr_decay, epoch); }

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
        if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
        if (!(gray_fraction >= 0.0 && gray_fraction <= 1.0)) throw ConfigError("gray_fraction must lie in [0, 1]");
        ranking.validate();
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"initial_lr", c.initial_lr},
            {"lr_decay", c.lr_decay},
            {"seed", c.seed},
            {"ranking", ranking_to_json(c.ranking)},
            {"widths", c.widths},
            {"gray_fraction", c.gray_fraction},
            {"gray_patch_probability", c.gray_augment.patch_probability},
            {"gray_max_patch_fraction", c.gray_augment.max_patch_fraction},
            {"pair_widths", c.pair_widths},
            {"histogram_bins", c.histogram_bins},
            {"shallow_hidden", c.shallow_hidden}};
}

using EpochCallback = std::function<void(int epoch, double lr, double mean_loss)>;

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;
};

namespace detail {

/// Runs the epoch/batch loop. `item` computes the loss of training item
/// `index`, adds `scale` times its gradient into `grad`, and returns the loss.
/// Each item draws from a stream keyed by (seed, epoch, index), so results do
/// not depend on batch composition.
template <class T, class ItemFn>
std::vector<double> run_training(nn::ParameterSet<T>& params, size_t n_items, const TrainConfig& cfg,
                                 ItemFn&& item, const EpochCallback& on_epoch) {
    cfg.validate();
    if (n_items == 0) throw ConfigError("training corpus is empty");
    nn::Adam<T> adam(params.size());
    Rng order_rng = Rng::derive(cfg.seed, 0x5eed);
    std::vector<size_t> order(n_items);
    std::vector<double> epoch_losses;
    std::vector<T> grad(params.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = 0; i < n_items; ++i) order[i] = i;
        order_rng.shuffle(order);
        const double lr = cfg.lr_at(epoch);
        double epoch_total = 0.0;
        int batch = 0;
        for (size_t start = 0; start < n_items; start += cfg.batch_size, ++batch) {
            const size_t end = std::min(n_items, start + static_cast<size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), T(0));
            double batch_total = 0.0;
            for (size_t k = start; k < end; ++k) {
                Rng item_rng = Rng::derive(cfg.seed ^ Rng::mix(static_cast<uint64_t>(epoch) + 1), order[k]);
                try {
                    batch_total += item(order[k], item_rng, std::span<T>(grad), scale);
                } catch (const std::domain_error&) {
                    throw TrainingDiverged(epoch, batch);
                }
            }
            if (!std::isfinite(batch_total)) throw TrainingDiverged(epoch, batch);
            for (auto g : grad)
                if (!std::isfinite(static_cast<double>(g))) throw TrainingDiverged(epoch, batch);
            adam.step(params.values(), grad, lr);
            epoch_total += batch_total;
        }
        epoch_losses.push_back(epoch_total / static_cast<double>(n_items));
        if (on_epoch) on_epoch(epoch, lr, epoch_losses.back());
    }
    return epoch_losses;
}

inline std::vector<std::string> corpus_vocab(const std::vector<Sample>& corpus) {
    if (corpus.empty()) throw ConfigError("training corpus is empty");
    const auto& vocab = corpus.front().masks.class_vocab;
    for (const auto& s : corpus)
        if (s.masks.class_vocab != vocab) throw ConfigError("samples disagree on the class vocabulary");
    return vocab;
}

inline bool planes_identical(const TriChannelImage& im) {
    return im[0].values == im[1].values && im[0].values == im[2].values;
}

inline nlohmann::json train_meta(const TrainConfig& cfg) { return {{"train_config", to_json(cfg)}, {"seed", cfg.seed}}; }

} // namespace detail

/// Loss and gradient of one permuted sample under the channel scorer.
template <class T>
double orderer_item_loss(const ScorerParams<T>& sp, const PermutedSample& item, const RankingConfig& ranking,
                         std::span<T> grad, double scale) {
    std::array<ChannelPass<T>, 3> passes;
    ScoreTriple scores;
    const bool identical = detail::planes_identical(item.image);
    for (int c = 0; c < 3; ++c) {
        if (identical && c > 0) {
            scores[c] = scores[0];
            continue;
        }
        passes[c] = score_channel_pass(item.image[c], item.masks, sp);
        scores[c] = passes[c].score;
    }
    const double loss = ranking_loss(scores, item.targets, ranking);
    if (grad.empty()) return loss;
    const auto dscores = ranking_loss_grad(scores, item.targets, ranking);
    if (identical) {
        const double d = dscores[0] + dscores[1] + dscores[2];
        if (d != 0.0) score_channel_backward(sp, item.masks, passes[0], scale * d, grad);
        return loss;
    }
    for (int c = 0; c < 3; ++c)
        if (dscores[c] != 0.0) score_channel_backward(sp, item.masks, passes[c], scale * dscores[c], grad);
    return loss;
}

/// Mean ranking loss over a set of permuted samples (no gradient).
template <class T>
double mean_ranking_loss(const ScorerParams<T>& sp, const std::vector<PermutedSample>& items,
                         const RankingConfig& ranking) {
    double total = 0.0;
    for (const auto& it : items) total += orderer_item_loss(sp, it, ranking, std::span<T>{}, 0.0);
    return total / static_cast<double>(items.size());
}

/// Training item for the scorer: a grayscale augmentation with probability
/// gray_fraction, otherwise a uniformly random channel layout.
inline PermutedSample orderer_training_item(const Sample& s, const TrainConfig& cfg, Rng& rng) {
    if (cfg.gray_fraction > 0.0 && rng.bernoulli(cfg.gray_fraction)) return grayscale_augment(s, rng, cfg.gray_augment);
    return expand_permutations(s, ExpandMode::single_random, &rng).front();
}

inline TrainResult train_orderer(const std::vector<Sample>& corpus, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
    auto sp = ScorerParams<float>::create(cfg.widths, detail::corpus_vocab(corpus), cfg.seed);
    auto losses = detail::run_training(
        sp.params, corpus.size(), cfg,
        [&](size_t i, Rng& rng, std::span<float> grad, double scale) {
            return orderer_item_loss(sp, orderer_training_item(corpus[i], cfg, rng), cfg.ranking, grad, scale);
        },
        on_epoch);
    return {make_checkpoint(sp, cfg.ranking, detail::train_meta(cfg)), std::move(losses)};
}

// ---------------------------------------------------------------------------

/// Pair-scorer item: s12 = f(I1, I2), s13 = f(I1, I3), target 1 for RGB and 0
/// for BGR, scored with the single-pair ranking loss on s12 - s13.
template <class T>
double bgr_item_loss(const PairScorerParams<T>& pp, const TriChannelImage& image, bool is_rgb,
                     const RankingConfig& ranking, std::span<T> grad, double scale) {
    typename nn::ConvClassifier<T>::Tape t12, t13;
    const double s12 = score_pair(stack_planes<T>(image[0], image[1]), pp, &t12);
    const double s13 = score_pair(stack_planes<T>(image[0], image[2]), pp, &t13);
    const double y = is_rgb ? 1.0 : 0.0;
    const double loss = pair_loss(s12 - s13, y, ranking);
    if (grad.empty()) return loss;
    const double d = scale * loss_grad_delta(s12 - s13, y, ranking);
    const std::vector<T> d12{static_cast<T>(d)}, d13{static_cast<T>(-d)};
    pp.net.backward(pp.params, grad, t12, d12);
    pp.net.backward(pp.params, grad, t13, d13);
    return loss;
}

/// Every sample contributes its RGB and its BGR layout in each epoch.
inline TrainResult train_bgr(const std::vector<Sample>& corpus, const TrainConfig& cfg,
                             const EpochCallback& on_epoch = {}) {
    auto pp = PairScorerParams<float>::create(cfg.seed, cfg.pair_widths);
    auto losses = detail::run_training(
        pp.params, corpus.size() * 2, cfg,
        [&](size_t i, Rng&, std::span<float> grad, double scale) {
            const bool rgb = i % 2 == 0;
            const auto& s = corpus[i / 2];
            const auto img = rgb ? s.image : permute_channels(s.image, ChannelPermutation::bgr());
            return bgr_item_loss(pp, img, rgb, cfg.ranking, grad, scale);
        },
        on_epoch);
    return {make_checkpoint(pp, cfg.ranking, detail::train_meta(cfg)), std::move(losses)};
}

// ---------------------------------------------------------------------------

template <class T>
double softmax_item_loss(const SoftmaxModel<T>& m, const TriChannelImage& image, size_t label, std::span<T> grad,
                         double scale) {
    typename nn::ConvClassifier<T>::Tape tape;
    const auto logits = m.net.forward(m.params, image_tensor<T>(image), &tape);
    const auto p = softmax<T>(logits);
    const double loss = -std::log(std::max(p[label], 1e-300));
    if (grad.empty()) return loss;
    std::vector<T> dlogits(p.size());
    for (size_t k = 0; k < p.size(); ++k) dlogits[k] = static_cast<T>(scale * (p[k] - (k == label ? 1.0 : 0.0)));
    m.net.backward(m.params, grad, tape, dlogits);
    return loss;
}

/// Cross-entropy over 6 layouts, or over RGB/BGR when classes == 2.
inline TrainResult train_softmax(const std::vector<Sample>& corpus, const TrainConfig& cfg, int classes,
                                 const EpochCallback& on_epoch = {}) {
    auto m = SoftmaxModel<float>::create(classes, cfg.widths, cfg.seed);
    const auto labels = softmax_labels(classes);
    auto losses = detail::run_training(
        m.params, corpus.size(), cfg,
        [&](size_t i, Rng& rng, std::span<float> grad, double scale) {
            const auto label = static_cast<size_t>(rng.integer(0, classes - 1));
            return softmax_item_loss(m, permute_channels(corpus[i].image, labels[label]), label, grad, scale);
        },
        on_epoch);
    return {make_checkpoint(m, detail::train_meta(cfg)), std::move(losses)};
}

// ---------------------------------------------------------------------------

/// Binary cross-entropy over the three channel pairs of one layout, computed
/// from the per-channel histograms alone.
template <class T>
double shallow_item_loss(const ShallowModel<T>& m, const std::array<ColorHistogram, 3>& hists,
                         const PairTargets& targets, std::span<T> grad, double scale) {
    double loss = 0.0;
    for (size_t k = 0; k < kPairs.size(); ++k) {
        const auto pass = m.forward(hists[kPairs[k][0]], hists[kPairs[k][1]]);
        const double z = static_cast<double>(pass.logit);
        const double y = targets[k];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (!grad.empty()) m.backward(pass, scale * (logistic(z) - y) / 3.0, grad);
    }
    return loss / 3.0;
}

/// Trains on the RGB-ordered histograms of each image; a layout is applied by
/// reordering the three histograms.
inline TrainResult train_shallow_histograms(const std::vector<std::array<ColorHistogram, 3>>& rgb_histograms,
                                            const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    auto m = ShallowModel<float>::create(cfg.seed, cfg.histogram_bins, cfg.shallow_hidden);
    auto losses = detail::run_training(
        m.params, rgb_histograms.size(), cfg,
        [&](size_t i, Rng& rng, std::span<float> grad, double scale) {
            const auto perm = ChannelPermutation::all()[rng.integer(0, 5)];
            const auto& h = rgb_histograms[i];
            const std::array<ColorHistogram, 3> laid_out{h[color_index(perm.label(0))], h[color_index(perm.label(1))],
                                                         h[color_index(perm.label(2))]};
            return shallow_item_loss(m, laid_out, pair_targets(perm), grad, scale);
        },
        on_epoch);
    return {make_checkpoint(m, detail::train_meta(cfg)), std::move(losses)};
}

inline TrainResult train_shallow(const std::vector<Sample>& corpus, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
    std::vector<std::array<ColorHistogram, 3>> hists;
    hists.reserve(corpus.size());
    for (const auto& s : corpus) hists.push_back(image_histograms(s.image, cfg.histogram_bins));
    return train_shallow_histograms(hists, cfg, on_epoch);
}

} // namespace chorder
