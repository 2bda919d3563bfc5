#pragma once

// Forward/backward kernels for the small convolutional models. Each layer
// writes parameter gradients into a flat buffer laid out like its
// ParameterSet; activations never alias.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chorder/nn/parameters.hpp"
#include "chorder/nn/tensor.hpp"

namespace chorder::nn {

namespace detail {

/// (C*9, H*W) patch matrix for a 3×3 kernel with zero padding of 1.
template <class T>
RowMatrix<T> im2col3x3(const Tensor<T>& x) {
    const int H = x.height, W = x.width;
    const auto hw = static_cast<Eigen::Index>(x.plane_size());
    RowMatrix<T> cols = RowMatrix<T>::Zero(static_cast<Eigen::Index>(x.channels) * 9, hw);
    for (int c = 0; c < x.channels; ++c) {
        const T* src = x.data.data() + c * x.plane_size();
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = cols.row(c * 9 + ky * 3 + kx).data();
                const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                if (x1 <= x0) continue;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    std::memcpy(row + y * W + x0, src + sy * W + x0 + kx - 1, sizeof(T) * (x1 - x0));
                }
            }
        }
    }
    return cols;
}

template <class T>
void col2im3x3(const RowMatrix<T>& cols, Tensor<T>& dx) {
    const int H = dx.height, W = dx.width;
    for (int c = 0; c < dx.channels; ++c) {
        T* dst = dx.data.data() + c * dx.plane_size();
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = cols.row(c * 9 + ky * 3 + kx).data();
                const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    const T* s = row + y * W;
                    for (int xx = x0; xx < x1; ++xx) dst[sy * W + xx + kx - 1] += s[xx];
                }
            }
        }
    }
}

} // namespace detail

/// 3×3 same-padding convolution with bias and optional fused ReLU.
template <class T>
struct Conv3x3 {
    int in_channels = 0;
    int out_channels = 0;
    bool relu = true;
    size_t weight = 0;
    size_t bias = 0;

    static Conv3x3 declare(ParameterSet<T>& p, const std::string& name, int in, int out, bool relu = true) {
        Conv3x3 c;
        c.in_channels = in;
        c.out_channels = out;
        c.relu = relu;
        c.weight = p.add(name + ".weight", {out, in, 3, 3});
        c.bias = p.add(name + ".bias", {out});
        return c;
    }

    void init(ParameterSet<T>& p, Rng& rng) const {
        init_fan_in_uniform(p[weight], in_channels * 9, rng);
        std::fill(p[bias].begin(), p[bias].end(), T(0));
    }

    Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x) const {
        if (x.channels != in_channels) throw InputError("conv: unexpected input channel count");
        const auto cols = detail::im2col3x3(x);
        ConstMatrixMap<T> w(p[weight].data(), out_channels, in_channels * 9);
        Tensor<T> y(out_channels, x.height, x.width);
        auto ym = y.matrix();
        ym.noalias() = w * cols;
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(p[bias].data(), out_channels);
        ym.colwise() += b;
        if (relu) ym = ym.cwiseMax(T(0));
        return y;
    }

    /// `y` is this layer's forward output and `dy` the gradient at it.
    Tensor<T> backward(const ParameterSet<T>& p, std::span<T> grad, const Tensor<T>& x, const Tensor<T>& y,
                       Tensor<T> dy, bool need_input_grad = true) const {
        if (relu)
            for (size_t i = 0; i < dy.size(); ++i)
                if (!(y.data[i] > T(0))) dy.data[i] = T(0);
        const auto cols = detail::im2col3x3(x);
        const auto dym = std::as_const(dy).matrix();
        const auto& ws = p.slot(weight);
        MatrixMap<T> gw(grad.data() + ws.offset, out_channels, in_channels * 9);
        gw.noalias() += dym * cols.transpose();
        T* gb = grad.data() + p.slot(bias).offset;
        for (int o = 0; o < out_channels; ++o) {
            const T* row = dy.data.data() + o * dy.plane_size();
            T s = T(0);
            for (size_t i = 0; i < dy.plane_size(); ++i) s += row[i];
            gb[o] += s;
        }
        Tensor<T> dx;
        if (!need_input_grad) return dx;
        ConstMatrixMap<T> w(p[weight].data(), out_channels, in_channels * 9);
        const RowMatrix<T> dcols = w.transpose() * dym;
        dx = Tensor<T>(in_channels, x.height, x.width);
        detail::col2im3x3(dcols, dx);
        return dx;
    }
};

/// 2×2 max pooling with stride 2; the first maximum in raster order wins.
template <class T>
struct MaxPool2 {
    std::vector<uint32_t> argmax;

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.height % 2 || x.width % 2) throw InputError("max-pool needs even spatial size");
        Tensor<T> y(x.channels, x.height / 2, x.width / 2);
        argmax.assign(y.size(), 0);
        size_t o = 0;
        for (int c = 0; c < x.channels; ++c) {
            const size_t base = c * x.plane_size();
            for (int yy = 0; yy < y.height; ++yy) {
                for (int xx = 0; xx < y.width; ++xx, ++o) {
                    size_t best = base + static_cast<size_t>(2 * yy) * x.width + 2 * xx;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const size_t i = base + static_cast<size_t>(2 * yy + dy) * x.width + 2 * xx + dx;
                            if (x.data[i] > x.data[best]) best = i;
                        }
                    y.data[o] = x.data[best];
                    argmax[o] = static_cast<uint32_t>(best);
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, int in_height, int in_width) const {
        Tensor<T> dx(dy.channels, in_height, in_width);
        for (size_t o = 0; o < dy.size(); ++o) dx.data[argmax[o]] += dy.data[o];
        return dx;
    }
};

template <class T>
Tensor<T> upsample2(const Tensor<T>& x) {
    Tensor<T> y(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < y.height; ++yy)
            for (int xx = 0; xx < y.width; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
    return y;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.channels, dy.height / 2, dy.width / 2);
    for (int c = 0; c < dy.channels; ++c)
        for (int yy = 0; yy < dy.height; ++yy)
            for (int xx = 0; xx < dy.width; ++xx) dx.at(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
    return dx;
}

template <class T>
std::vector<T> global_average_pool(const Tensor<T>& x) {
    std::vector<T> out(x.channels);
    for (int c = 0; c < x.channels; ++c) {
        const auto pl = x.plane(c);
        T acc = T(0);
        for (auto v : pl) acc += v;
        out[c] = acc / static_cast<T>(pl.size());
    }
    return out;
}

template <class T>
Tensor<T> global_average_pool_backward(std::span<const T> dout, int height, int width) {
    Tensor<T> dx(static_cast<int>(dout.size()), height, width);
    const T scale = T(1) / static_cast<T>(static_cast<size_t>(height) * width);
    for (int c = 0; c < dx.channels; ++c)
        std::fill(dx.plane(c).begin(), dx.plane(c).end(), dout[c] * scale);
    return dx;
}

/// Fully connected layer y = W x (+ b).
template <class T>
struct Linear {
    int in_features = 0;
    int out_features = 0;
    size_t weight = 0;
    bool has_bias = true;
    size_t bias = 0;

    static Linear declare(ParameterSet<T>& p, const std::string& name, int in, int out, bool with_bias = true) {
        Linear l;
        l.in_features = in;
        l.out_features = out;
        l.has_bias = with_bias;
        l.weight = p.add(name + ".weight", {out, in});
        if (with_bias) l.bias = p.add(name + ".bias", {out});
        return l;
    }

    void init(ParameterSet<T>& p, Rng& rng) const {
        init_fan_in_uniform(p[weight], in_features, rng);
        if (has_bias) std::fill(p[bias].begin(), p[bias].end(), T(0));
    }

    std::vector<T> forward(const ParameterSet<T>& p, std::span<const T> x) const {
        if (static_cast<int>(x.size()) != in_features) throw InputError("linear: unexpected input width");
        const auto w = p[weight];
        std::vector<T> y(out_features, T(0));
        for (int o = 0; o < out_features; ++o) {
            T acc = has_bias ? p[bias][o] : T(0);
            for (int i = 0; i < in_features; ++i) acc += w[static_cast<size_t>(o) * in_features + i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    std::vector<T> backward(const ParameterSet<T>& p, std::span<T> grad, std::span<const T> x,
                            std::span<const T> dy) const {
        const auto w = p[weight];
        T* gw = grad.data() + p.slot(weight).offset;
        std::vector<T> dx(in_features, T(0));
        for (int o = 0; o < out_features; ++o) {
            for (int i = 0; i < in_features; ++i) {
                gw[static_cast<size_t>(o) * in_features + i] += dy[o] * x[i];
                dx[i] += w[static_cast<size_t>(o) * in_features + i] * dy[o];
            }
            if (has_bias) grad[p.slot(bias).offset + o] += dy[o];
        }
        return dx;
    }
};

} // namespace chorder::nn
