#pragma once

#include <array>
#include <string>

#include "chorder/nn/layers.hpp"

namespace chorder::nn {

/// Four-level encoder/decoder over a single input plane.
///
/// Encoder stage s runs two conv+ReLU layers at width `widths[s]` and then a
/// 2× max-pool, so inputs must be divisible by 16. Decoder stage k upsamples
/// (nearest), applies conv+ReLU, concatenates the matching encoder output and
/// merges with another conv. Decoder widths are widths[2], widths[1],
/// widths[0] and finally 1; the last merge has no nonlinearity.
template <class T>
class UNet {
public:
    static constexpr int kLevels = 4;
    static constexpr int kAlignment = 1 << kLevels;

    struct Tape {
        std::array<Tensor<T>, kLevels> enc_in, enc_a, enc_b;
        std::array<MaxPool2<T>, kLevels> pools;
        std::array<Tensor<T>, kLevels> dec_up, dec_u, dec_cat, dec_out;
    };

    UNet() = default;

    UNet(const std::array<int, kLevels>& widths, ParameterSet<T>& p, const std::string& prefix = "unet")
        : widths_(widths) {
        int in = 1;
        for (int s = 0; s < kLevels; ++s) {
            if (widths[s] < 1) throw ConfigError("U-Net widths must be positive");
            const auto name = prefix + ".enc" + std::to_string(s);
            enc_a_[s] = Conv3x3<T>::declare(p, name + ".conv1", in, widths[s]);
            enc_b_[s] = Conv3x3<T>::declare(p, name + ".conv2", widths[s], widths[s]);
            in = widths[s];
        }
        for (int k = 0; k < kLevels; ++k) {
            const int level = kLevels - 1 - k;
            const bool last = k == kLevels - 1;
            const int up_width = last ? widths[0] : widths[level - 1];
            const int out_width = last ? 1 : widths[level - 1];
            const auto name = prefix + ".dec" + std::to_string(k);
            dec_up_[k] = Conv3x3<T>::declare(p, name + ".up", in, up_width);
            dec_merge_[k] = Conv3x3<T>::declare(p, name + ".merge", up_width + widths[level], out_width, !last);
            in = out_width;
        }
    }

    const std::array<int, kLevels>& widths() const noexcept { return widths_; }

    std::array<int, kLevels> decoder_widths() const { return {widths_[2], widths_[1], widths_[0], 1}; }

    void init(ParameterSet<T>& p, Rng& rng) const {
        for (int s = 0; s < kLevels; ++s) {
            enc_a_[s].init(p, rng);
            enc_b_[s].init(p, rng);
        }
        for (int k = 0; k < kLevels; ++k) {
            dec_up_[k].init(p, rng);
            dec_merge_[k].init(p, rng);
        }
    }

    /// x: (1, H, W) with H, W divisible by kAlignment. Returns (1, H, W).
    Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Tape* tape = nullptr) const {
        if (x.channels != 1) throw InputError("U-Net expects a single input plane");
        if (x.height % kAlignment || x.width % kAlignment)
            throw InputError("U-Net input must be divisible by " + std::to_string(kAlignment));
        Tape local;
        Tape& t = tape ? *tape : local;
        Tensor<T> cur = x;
        for (int s = 0; s < kLevels; ++s) {
            t.enc_in[s] = std::move(cur);
            t.enc_a[s] = enc_a_[s].forward(p, t.enc_in[s]);
            t.enc_b[s] = enc_b_[s].forward(p, t.enc_a[s]);
            cur = t.pools[s].forward(t.enc_b[s]);
        }
        for (int k = 0; k < kLevels; ++k) {
            const int level = kLevels - 1 - k;
            t.dec_up[k] = upsample2(cur);
            t.dec_u[k] = dec_up_[k].forward(p, t.dec_up[k]);
            t.dec_cat[k] = concat_channels(t.dec_u[k], t.enc_b[level]);
            t.dec_out[k] = dec_merge_[k].forward(p, t.dec_cat[k]);
            cur = t.dec_out[k];
        }
        return cur;
    }

    /// Accumulates parameter gradients for dL/d(output) = `dout`.
    void backward(const ParameterSet<T>& p, std::span<T> grad, const Tape& t, const Tensor<T>& dout) const {
        std::array<Tensor<T>, kLevels> dskip;
        Tensor<T> d = dout;
        for (int k = kLevels - 1; k >= 0; --k) {
            const int level = kLevels - 1 - k;
            auto dcat = dec_merge_[k].backward(p, grad, t.dec_cat[k], t.dec_out[k], std::move(d));
            Tensor<T> du;
            split_channels(dcat, dec_up_[k].out_channels, du, dskip[level]);
            auto dup = dec_up_[k].backward(p, grad, t.dec_up[k], t.dec_u[k], std::move(du));
            d = upsample2_backward(dup);
        }
        for (int s = kLevels - 1; s >= 0; --s) {
            auto db = t.pools[s].backward(d, t.enc_b[s].height, t.enc_b[s].width);
            for (size_t i = 0; i < db.size(); ++i) db.data[i] += dskip[s].data[i];
            auto da = enc_b_[s].backward(p, grad, t.enc_a[s], t.enc_b[s], std::move(db));
            d = enc_a_[s].backward(p, grad, t.enc_in[s], t.enc_a[s], std::move(da), s > 0);
        }
    }

private:
    std::array<int, kLevels> widths_{};
    std::array<Conv3x3<T>, kLevels> enc_a_{}, enc_b_{};
    std::array<Conv3x3<T>, kLevels> dec_up_{}, dec_merge_{};
};

/// Stack of conv blocks (2× max-pool between blocks), global average
/// pooling and a linear head. Backs the pair scorer and the softmax baseline.
template <class T>
class ConvClassifier {
public:
    struct Tape {
        Tensor<T> input;
        std::vector<Tensor<T>> conv_in, conv_out;
        std::vector<MaxPool2<T>> pools;
        std::vector<Tensor<T>> pool_in;
        std::vector<T> pooled;
        std::vector<T> logits;
    };

    ConvClassifier() = default;

    ConvClassifier(int in_channels, std::vector<int> widths, int convs_per_block, int out_features,
                   bool head_bias, ParameterSet<T>& p, const std::string& prefix)
        : in_channels_(in_channels), widths_(std::move(widths)), convs_per_block_(convs_per_block) {
        if (widths_.empty() || convs_per_block < 1) throw ConfigError("classifier needs at least one conv");
        int in = in_channels;
        for (size_t b = 0; b < widths_.size(); ++b) {
            for (int c = 0; c < convs_per_block; ++c) {
                convs_.push_back(Conv3x3<T>::declare(
                    p, prefix + ".block" + std::to_string(b) + ".conv" + std::to_string(c + 1), in, widths_[b]));
                in = widths_[b];
            }
        }
        head_ = Linear<T>::declare(p, prefix + ".head", in, out_features, head_bias);
    }

    int in_channels() const noexcept { return in_channels_; }
    int out_features() const noexcept { return head_.out_features; }
    const std::vector<int>& widths() const noexcept { return widths_; }
    int alignment() const noexcept { return 1 << (static_cast<int>(widths_.size()) - 1); }

    void init(ParameterSet<T>& p, Rng& rng) const {
        for (const auto& c : convs_) c.init(p, rng);
        head_.init(p, rng);
    }

    /// Input is reflect-padded to the pooling alignment before the stack runs.
    std::vector<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Tape* tape = nullptr) const {
        if (x.channels != in_channels_) throw InputError("classifier: unexpected input plane count");
        Tape local;
        Tape& t = tape ? *tape : local;
        t.input = reflect_pad(x, alignment());
        t.conv_in.clear();
        t.conv_out.clear();
        t.pools.assign(widths_.size() - 1, MaxPool2<T>{});
        t.pool_in.assign(widths_.size() - 1, Tensor<T>{});
        Tensor<T> cur = t.input;
        size_t ci = 0;
        for (size_t b = 0; b < widths_.size(); ++b) {
            if (b > 0) {
                t.pool_in[b - 1] = cur;
                cur = t.pools[b - 1].forward(t.pool_in[b - 1]);
            }
            for (int c = 0; c < convs_per_block_; ++c, ++ci) {
                t.conv_in.push_back(std::move(cur));
                t.conv_out.push_back(convs_[ci].forward(p, t.conv_in.back()));
                cur = t.conv_out.back();
            }
        }
        t.pooled = global_average_pool(cur);
        t.logits = head_.forward(p, t.pooled);
        return t.logits;
    }

    void backward(const ParameterSet<T>& p, std::span<T> grad, const Tape& t, std::span<const T> dlogits) const {
        const auto dpooled = head_.backward(p, grad, t.pooled, dlogits);
        const auto& last = t.conv_out.back();
        Tensor<T> d = global_average_pool_backward<T>(dpooled, last.height, last.width);
        size_t ci = convs_.size();
        for (size_t b = widths_.size(); b-- > 0;) {
            for (int c = 0; c < convs_per_block_; ++c) {
                --ci;
                d = convs_[ci].backward(p, grad, t.conv_in[ci], t.conv_out[ci], std::move(d), ci > 0);
            }
            if (b > 0) d = t.pools[b - 1].backward(d, t.pool_in[b - 1].height, t.pool_in[b - 1].width);
        }
    }

private:
    int in_channels_ = 0;
    std::vector<int> widths_;
    int convs_per_block_ = 1;
    std::vector<Conv3x3<T>> convs_;
    Linear<T> head_{};
};

} // namespace chorder::nn
