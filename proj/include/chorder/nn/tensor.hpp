#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "chorder/errors.hpp"

namespace chorder::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Channel-major (C, H, W) activation tensor for a single sample.
template <class T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T(0))
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    size_t plane_size() const noexcept { return static_cast<size_t>(height) * width; }
    size_t size() const noexcept { return data.size(); }

    T& at(int c, int y, int x) { return data[(c * plane_size()) + static_cast<size_t>(y) * width + x]; }
    T at(int c, int y, int x) const { return data[(c * plane_size()) + static_cast<size_t>(y) * width + x]; }

    std::span<T> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const T> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

    /// View as a (C, H*W) matrix.
    MatrixMap<T> matrix() { return {data.data(), channels, static_cast<Eigen::Index>(plane_size())}; }
    ConstMatrixMap<T> matrix() const { return {data.data(), channels, static_cast<Eigen::Index>(plane_size())}; }

    bool same_shape(const Tensor& o) const noexcept {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

/// Stacks channel groups of equal spatial size.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.height != b.height || a.width != b.width) throw InputError("concat: spatial sizes differ");
    Tensor<T> out;
    out.channels = a.channels + b.channels;
    out.height = a.height;
    out.width = a.width;
    out.data.reserve(a.size() + b.size());
    out.data.insert(out.data.end(), a.data.begin(), a.data.end());
    out.data.insert(out.data.end(), b.data.begin(), b.data.end());
    return out;
}

/// Inverse of concat_channels for gradients: first `first_channels` go to `a`.
template <class T>
void split_channels(const Tensor<T>& g, int first_channels, Tensor<T>& a, Tensor<T>& b) {
    const size_t cut = static_cast<size_t>(first_channels) * g.plane_size();
    a = Tensor<T>(first_channels, g.height, g.width);
    b = Tensor<T>(g.channels - first_channels, g.height, g.width);
    std::copy(g.data.begin(), g.data.begin() + cut, a.data.begin());
    std::copy(g.data.begin() + cut, g.data.end(), b.data.begin());
}

/// Mirror index into [0, n) with period 2n (edge sample repeated).
inline int mirror_index(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

inline int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

/// Reflect-pads the bottom and right edges up to the next multiple.
template <class T>
Tensor<T> reflect_pad(const Tensor<T>& x, int multiple) {
    const int H = round_up(x.height, multiple), W = round_up(x.width, multiple);
    if (H == x.height && W == x.width) return x;
    Tensor<T> y(x.channels, H, W);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx < W; ++xx)
                y.at(c, yy, xx) = x.at(c, mirror_index(yy, x.height), mirror_index(xx, x.width));
    return y;
}

/// Top-left (h, w) window of x.
template <class T>
Tensor<T> crop(const Tensor<T>& x, int h, int w) {
    if (h == x.height && w == x.width) return x;
    Tensor<T> y(x.channels, h, w);
    for (int c = 0; c < x.channels; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = x.at(c, yy, xx);
    return y;
}

/// Gradient of crop: zero outside the kept window.
template <class T>
Tensor<T> uncrop(const Tensor<T>& g, int h, int w) {
    if (h == g.height && w == g.width) return g;
    Tensor<T> y(g.channels, h, w);
    for (int c = 0; c < g.channels; ++c)
        for (int yy = 0; yy < g.height; ++yy)
            for (int xx = 0; xx < g.width; ++xx) y.at(c, yy, xx) = g.at(c, yy, xx);
    return y;
}

} // namespace chorder::nn
