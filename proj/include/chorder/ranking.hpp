#pragma once

// Pairwise ranking core: probabilities, targets and the cross-entropy ranking
// loss over the three channel pairs (1,2), (1,3), (2,3).

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "chorder/errors.hpp"
#include "chorder/permutation.hpp"

namespace chorder {

enum class Link : uint8_t { tanh, identity };

inline std::string link_name(Link g) { return g == Link::tanh ? "tanh" : "identity"; }

inline Link parse_link(const std::string& s) {
    if (s == "tanh") return Link::tanh;
    if (s == "identity") return Link::identity;
    throw ConfigError("unknown link function '" + s + "' (expected tanh or identity)");
}

struct RankingConfig {
    double temperature = 0.1;
    Link link = Link::tanh;

    void validate() const {
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw ConfigError("temperature must be a positive finite number");
    }

    double g(double delta) const { return link == Link::tanh ? std::tanh(delta) : delta; }

    double g_prime(double delta) const {
        if (link == Link::identity) return 1.0;
        const double t = std::tanh(delta);
        return 1.0 - t * t;
    }

    bool operator==(const RankingConfig&) const = default;
};

/// Desired probability that channel i precedes channel j: exactly 0, 1/2 or 1.
enum class PairTarget : uint8_t { follows = 0, tied = 1, precedes = 2 };

constexpr double target_value(PairTarget t) noexcept { return 0.5 * static_cast<int>(t); }

/// Pair indices in the fixed order (1,2), (1,3), (2,3), zero-based.
inline constexpr std::array<std::array<int, 2>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

struct PairTargets {
    std::array<PairTarget, 3> y{PairTarget::tied, PairTarget::tied, PairTarget::tied};

    constexpr PairTargets() = default;
    constexpr PairTargets(PairTarget y12, PairTarget y13, PairTarget y23) : y{y12, y13, y23} {
        if (!consistent()) throw ConfigError("pair targets violate transitivity");
    }

    double operator[](size_t k) const { return target_value(y[k]); }

    /// Total-preorder consistency across the three pairs.
    constexpr bool consistent() const {
        using enum PairTarget;
        const auto [a, b, c] = y;
        if (a == precedes && c == precedes && b != precedes) return false;
        if (a == follows && c == follows && b != follows) return false;
        // 1~2 and 2~3 forces 1~3; mixed ties must agree with the strict pair.
        if (a == tied && c == tied && b != tied) return false;
        if (a == tied && b != c) return false;
        if (c == tied && a != b) return false;
        if (b == tied && a != tied && a == c) return false;
        return true;
    }

    constexpr bool operator==(const PairTargets&) const = default;
};

struct ScoreTriple {
    std::array<double, 3> s{0.0, 0.0, 0.0};

    double& operator[](size_t i) { return s[i]; }
    double operator[](size_t i) const { return s[i]; }
    double delta(int i, int j) const { return s[i] - s[j]; }

    bool finite() const { return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); }); }

    bool operator==(const ScoreTriple&) const = default;
};

namespace detail {

/// log(1 + exp(-x)) without overflow.
inline double softplus_neg(double x) { return std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// exp(-x) / (1 + exp(-x)) = sigmoid(-x) without overflow.
inline double sigmoid_neg(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

} // namespace detail

/// P(s_i > s_j) = 1 / (1 + exp(-g(delta)/T)).
inline double pair_probability(double delta, const RankingConfig& cfg) {
    if (!std::isfinite(delta)) throw std::domain_error("pair_probability: non-finite score difference");
    return 1.0 - detail::sigmoid_neg(cfg.g(delta) / cfg.temperature);
}

/// Targets for an image laid out as `perm`, under the canonical order R > G > B.
constexpr PairTargets pair_targets(const ChannelPermutation& perm) {
    if (perm.is_gray()) return PairTargets{};
    PairTargets t;
    for (size_t k = 0; k < kPairs.size(); ++k) {
        const auto li = color_index(perm.label(kPairs[k][0]));
        const auto lj = color_index(perm.label(kPairs[k][1]));
        t.y[k] = li < lj ? PairTarget::precedes : PairTarget::follows;
    }
    return t;
}

/// Cross-entropy for a single pair as a function of the score difference,
/// written as y*softplus(-x) + (1-y)*softplus(x) so that neither hard target
/// suffers cancellation.
inline double pair_loss(double delta, double y, const RankingConfig& cfg) {
    const double x = cfg.g(delta) / cfg.temperature;
    return y * detail::softplus_neg(x) + (1.0 - y) * detail::softplus_neg(-x);
}

/// dL/d(delta) for one pair:
/// (g'(delta)/T) * ((1 - y) - exp(-x)/(1 + exp(-x))), x = g(delta)/T.
inline double loss_grad_delta(double delta, double y, const RankingConfig& cfg) {
    const double x = cfg.g(delta) / cfg.temperature;
    return cfg.g_prime(delta) / cfg.temperature * ((1.0 - y) - detail::sigmoid_neg(x));
}

inline double ranking_loss(const ScoreTriple& scores, const PairTargets& targets, const RankingConfig& cfg) {
    if (!scores.finite()) throw std::domain_error("ranking_loss: non-finite score");
    double total = 0.0;
    for (size_t k = 0; k < kPairs.size(); ++k)
        total += pair_loss(scores.delta(kPairs[k][0], kPairs[k][1]), targets[k], cfg);
    return total;
}

/// Gradient of ranking_loss with respect to (s1, s2, s3).
inline ScoreTriple ranking_loss_grad(const ScoreTriple& scores, const PairTargets& targets,
                                     const RankingConfig& cfg) {
    ScoreTriple grad;
    for (size_t k = 0; k < kPairs.size(); ++k) {
        const auto [i, j] = kPairs[k];
        const double d = loss_grad_delta(scores.delta(i, j), targets[k], cfg);
        grad[i] += d;
        grad[j] -= d;
    }
    return grad;
}

} // namespace chorder
