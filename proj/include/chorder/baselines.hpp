#pragma once

// Competing methods: a shallow classifier over per-channel color histograms
// and a 6-way (or RGB/BGR 2-way) softmax classifier over the stacked image.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "chorder/detectors.hpp"
#include "chorder/image.hpp"
#include "chorder/nn/unet.hpp"

namespace chorder {

inline constexpr int kDefaultHistogramBins = 256;

struct ColorHistogram {
    std::vector<double> bins;

    size_t size() const noexcept { return bins.size(); }
};

/// Equal-width bins over [0,1] (the last bin includes 1), normalized by the
/// pixel count.
inline ColorHistogram channel_histogram(const Plane& channel, int bins = kDefaultHistogramBins) {
    if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
    if (channel.empty()) throw InputError("cannot histogram an empty plane");
    ColorHistogram h{std::vector<double>(bins, 0.0)};
    for (float v : channel.values) {
        const int b = std::clamp(static_cast<int>(std::floor(static_cast<double>(v) * bins)), 0, bins - 1);
        h.bins[b] += 1.0;
    }
    const double n = static_cast<double>(channel.size());
    for (auto& b : h.bins) b /= n;
    return h;
}

inline std::array<ColorHistogram, 3> image_histograms(const TriChannelImage& image, int bins) {
    return {channel_histogram(image[0], bins), channel_histogram(image[1], bins), channel_histogram(image[2], bins)};
}

// ---------------------------------------------------------------------------
// Shallow pairwise model: [h_i, h_j] -> hidden ReLU layer -> logit.

inline constexpr int kShallowHidden = 64;

template <class T = float>
struct ShallowModel {
    int bins = kDefaultHistogramBins;
    int hidden = kShallowHidden;
    nn::ParameterSet<T> params;
    nn::Linear<T> layer1;
    nn::Linear<T> layer2;

    struct Pass {
        std::vector<T> input, hidden_pre, hidden;
        T logit = T(0);
    };

    static ShallowModel layout(int bins = kDefaultHistogramBins, int hidden = kShallowHidden) {
        ShallowModel m;
        m.bins = bins;
        m.hidden = hidden;
        m.layer1 = nn::Linear<T>::declare(m.params, "shallow.fc1", 2 * bins, hidden);
        m.layer2 = nn::Linear<T>::declare(m.params, "shallow.fc2", hidden, 1);
        return m;
    }

    static ShallowModel create(uint64_t seed, int bins = kDefaultHistogramBins, int hidden = kShallowHidden) {
        auto m = layout(bins, hidden);
        Rng rng(seed);
        m.layer1.init(m.params, rng);
        m.layer2.init(m.params, rng);
        return m;
    }

    Pass forward(const ColorHistogram& hi, const ColorHistogram& hj) const {
        if (static_cast<int>(hi.size()) != bins || static_cast<int>(hj.size()) != bins)
            throw InputError("histogram bin count does not match the shallow model");
        Pass p;
        p.input.reserve(2 * bins);
        for (double v : hi.bins) p.input.push_back(static_cast<T>(v));
        for (double v : hj.bins) p.input.push_back(static_cast<T>(v));
        p.hidden_pre = layer1.forward(params, p.input);
        p.hidden.resize(p.hidden_pre.size());
        std::transform(p.hidden_pre.begin(), p.hidden_pre.end(), p.hidden.begin(),
                       [](T v) { return std::max(v, T(0)); });
        p.logit = layer2.forward(params, p.hidden)[0];
        return p;
    }

    void backward(const Pass& p, double dlogit, std::span<T> grad) const {
        const std::vector<T> d{static_cast<T>(dlogit)};
        auto dh = layer2.backward(params, grad, p.hidden, d);
        for (size_t i = 0; i < dh.size(); ++i)
            if (!(p.hidden_pre[i] > T(0))) dh[i] = T(0);
        layer1.backward(params, grad, p.input, dh);
    }
};

inline double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Probability that channel i ranks ahead of channel j under R > G > B.
template <class T>
double shallow_pair_classify(const ColorHistogram& hi, const ColorHistogram& hj, const ShallowModel<T>& model) {
    if (hi.size() != hj.size()) throw InputError("histogram bin counts differ");
    return logistic(static_cast<double>(model.forward(hi, hj).logit));
}

/// Soft vote: each channel scores the summed probability of preceding the
/// other two; the resulting triple is ordered by predict_order.
template <class T>
OrderPrediction shallow_predict(const TriChannelImage& image, const ShallowModel<T>& model) {
    const auto h = image_histograms(image, model.bins);
    ScoreTriple votes;
    for (const auto& [i, j] : kPairs) {
        const double p = shallow_pair_classify(h[i], h[j], model);
        votes[i] += p;
        votes[j] += 1.0 - p;
    }
    return predict_order(votes);
}

// ---------------------------------------------------------------------------
// Softmax classifier over the stacked three planes.

struct SoftmaxOutput {
    std::vector<double> p;

    size_t argmax() const { return static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin()); }
};

/// Class labels of a softmax model with `classes` outputs (6 or 2).
inline std::vector<ChannelPermutation> softmax_labels(int classes) {
    if (classes == 6) {
        const auto all = ChannelPermutation::all();
        return {all.begin(), all.end()};
    }
    if (classes == 2) return {ChannelPermutation::rgb(), ChannelPermutation::bgr()};
    throw ConfigError("softmax model supports 6 or 2 classes");
}

template <class T = float>
struct SoftmaxModel {
    int classes = 6;
    UNetWidths widths{};
    nn::ParameterSet<T> params;
    nn::ConvClassifier<T> net;

    static SoftmaxModel layout(int classes, const UNetWidths& widths) {
        softmax_labels(classes);
        SoftmaxModel m;
        m.classes = classes;
        m.widths = widths;
        m.net = nn::ConvClassifier<T>(3, std::vector<int>(widths.begin(), widths.end()), 2, classes, true,
                                      m.params, "softmax");
        return m;
    }

    static SoftmaxModel create(int classes, const UNetWidths& widths, uint64_t seed) {
        auto m = layout(classes, widths);
        Rng rng(seed);
        m.net.init(m.params, rng);
        return m;
    }
};

template <class T>
nn::Tensor<T> image_tensor(const TriChannelImage& image) {
    image.validate();
    nn::Tensor<T> t(3, image.height(), image.width());
    for (int c = 0; c < 3; ++c)
        std::transform(image[c].values.begin(), image[c].values.end(), t.plane(c).begin(),
                       [](float v) { return static_cast<T>(v); });
    return t;
}

template <class T>
std::vector<double> softmax(std::span<const T> logits) {
    const double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    for (auto& v : p) v /= z;
    return p;
}

template <class T>
SoftmaxOutput softmax_classify(const TriChannelImage& image, const SoftmaxModel<T>& model) {
    const auto logits = model.net.forward(model.params, image_tensor<T>(image));
    return {softmax<T>(logits)};
}

/// H[p] = -sum p_i ln p_i with 0 ln 0 = 0.
inline double softmax_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

inline double softmax_entropy(const SoftmaxOutput& out) { return softmax_entropy(std::span<const double>(out.p)); }

} // namespace chorder
