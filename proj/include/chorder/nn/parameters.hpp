#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "chorder/errors.hpp"
#include "chorder/random.hpp"

namespace chorder::nn {

/// Named, shaped slice of a flat parameter buffer.
struct Slot {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0;
    size_t size = 0;

    bool operator==(const Slot&) const = default;
};

/// All learnable arrays of a model in one contiguous buffer, in declaration
/// order. Gradients and optimizer moments use the same flat layout.
template <class T>
class ParameterSet {
public:
    size_t add(std::string name, std::vector<int> shape) {
        for (const auto& s : slots_)
            if (s.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
        const size_t n = std::accumulate(shape.begin(), shape.end(), size_t{1},
                                         [](size_t a, int d) { return a * static_cast<size_t>(d); });
        slots_.push_back({std::move(name), std::move(shape), values_.size(), n});
        values_.resize(values_.size() + n, T(0));
        return slots_.size() - 1;
    }

    size_t size() const noexcept { return values_.size(); }
    const std::vector<Slot>& slots() const noexcept { return slots_; }
    const Slot& slot(size_t i) const { return slots_.at(i); }

    size_t find(const std::string& name) const {
        for (size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].name == name) return i;
        throw ConfigError("no parameter named '" + name + "'");
    }

    std::span<T> operator[](size_t i) { return {values_.data() + slots_[i].offset, slots_[i].size}; }
    std::span<const T> operator[](size_t i) const { return {values_.data() + slots_[i].offset, slots_[i].size}; }

    std::vector<T>& values() noexcept { return values_; }
    const std::vector<T>& values() const noexcept { return values_; }

    /// Zero-initialized gradient buffer with the same layout.
    std::vector<T> zeros() const { return std::vector<T>(values_.size(), T(0)); }

    template <class U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out;
        for (const auto& s : slots_) out.add(s.name, s.shape);
        for (size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
        return out;
    }

    bool operator==(const ParameterSet&) const = default;

private:
    std::vector<Slot> slots_;
    std::vector<T> values_;
};

/// Uniform(-b, b) with b = sqrt(6 / fan_in), suited to ReLU stacks.
template <class T>
void init_fan_in_uniform(std::span<T> w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
}

} // namespace chorder::nn
