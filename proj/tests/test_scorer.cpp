#include <catch_amalgamated.hpp>

#include "chorder/data.hpp"
#include "chorder/scorer.hpp"

using namespace chorder;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const UNetWidths kTiny{2, 3, 4, 4};

TriChannelImage random_image(int h, int w, Rng& rng) {
    TriChannelImage im(h, w);
    for (int c = 0; c < 3; ++c)
        for (auto& v : im[c].values) v = quantize8(rng.uniform());
    return im;
}

MaskStack random_masks(int h, int w, int classes, Rng& rng) {
    std::vector<std::string> vocab;
    for (int i = 0; i < classes; ++i) vocab.push_back("c" + std::to_string(i));
    std::vector<uint8_t> labels(static_cast<size_t>(h) * w);
    for (auto& l : labels) l = static_cast<uint8_t>(rng.integer(0, classes));
    return MaskStack::from_label_map(h, w, labels, vocab);
}

nn::Tensor<float> constant_feature(int h, int w, float v) {
    nn::Tensor<float> f(1, h, w);
    std::fill(f.data.begin(), f.data.end(), v);
    return f;
}

} // namespace

TEST_CASE("masked mean pooling", "[scorer]") {
    const int H = 4, W = 4;
    MaskStack m(H, W, {"all", "none", "eight"});
    std::fill(m.masks[0].begin(), m.masks[0].end(), 1);
    for (int i = 0; i < 8; ++i) m.masks[2][i] = 1;

    auto c = masked_mean_pool(constant_feature(H, W, 5.0f), m);
    CHECK_THAT(c[0], WithinRel(5.0, 1e-4));
    CHECK(c[1] == 0.0);

    auto f = constant_feature(H, W, 0.0f);
    for (int i = 0; i < 8; ++i) f.data[i] = 2.0f;
    c = masked_mean_pool(f, m);
    CHECK_THAT(c[2], WithinRel(2.0, 1e-4));
    CHECK_THAT(c[2], WithinAbs(2.0 * 8 / (8 + kPoolEpsilon), 1e-15));

    CHECK_THROWS_AS(masked_mean_pool(constant_feature(3, 4, 1.0f), m), InputError);
}

TEST_CASE("zero weights give a zero feature plane", "[scorer]") {
    const auto sp = ScorerParams<float>::layout(kTiny, {"a"});
    const Plane zero(64, 64);
    const auto f = feature_map(zero, sp);
    CHECK(f.height == 64);
    CHECK(f.width == 64);
    CHECK(std::all_of(f.data.begin(), f.data.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("feature map keeps the input shape", "[scorer]") {
    Rng rng(4);
    const auto sp = ScorerParams<float>::create(kTiny, {"a"}, 9);
    for (auto [h, w] : {std::pair{48, 48}, std::pair{17, 30}, std::pair{5, 3}}) {
        Plane p(h, w);
        for (auto& v : p.values) v = static_cast<float>(rng.uniform());
        const auto f = feature_map(p, sp);
        CHECK(f.height == h);
        CHECK(f.width == w);
        CHECK(feature_map(p, sp).data == f.data);
    }
}

TEST_CASE("score is the prior inner product", "[scorer]") {
    Rng rng(12);
    auto sp = ScorerParams<float>::create(kTiny, {"a", "b", "c"}, 3);
    const auto im = random_image(20, 20, rng);
    const auto masks = random_masks(20, 20, 3, rng);
    const auto pooled = masked_mean_pool(feature_map(im[0], sp), masks);
    auto alpha = sp.params[sp.alpha];

    std::fill(alpha.begin(), alpha.end(), 0.0f);
    CHECK(score_channel(im[0], masks, sp) == 0.0);

    for (int n = 0; n < 3; ++n) {
        std::fill(alpha.begin(), alpha.end(), 0.0f);
        alpha[n] = 1.0f;
        CHECK(score_channel(im[0], masks, sp) == pooled[n]);
    }

    // linear in alpha
    const std::array<float, 3> a1{0.5f, -1.0f, 2.0f}, a2{1.5f, 0.25f, -0.75f};
    auto score_with = [&](const std::array<float, 3>& a) {
        std::copy(a.begin(), a.end(), alpha.begin());
        return score_channel(im[0], masks, sp);
    };
    const double s1 = score_with(a1), s2 = score_with(a2);
    const double s12 = score_with({a1[0] + a2[0], a1[1] + a2[1], a1[2] + a2[2]});
    CHECK_THAT(s12, WithinAbs(s1 + s2, 1e-12));
}

TEST_CASE("vocabulary mismatch is a config error", "[scorer]") {
    Rng rng(1);
    const auto sp = ScorerParams<float>::create(kTiny, {"a", "b"}, 1);
    const auto im = random_image(16, 16, rng);
    CHECK_THROWS_AS(score_image(im, random_masks(16, 16, 3, rng), sp), ConfigError);
    CHECK_THROWS_AS(ScorerParams<float>::create(kTiny, {}, 1), ConfigError);
}

TEST_CASE("identical planes give identical scores", "[scorer]") {
    Rng rng(2);
    const auto sp = ScorerParams<float>::create(kTiny, {"a", "b"}, 5);
    const auto im = random_image(24, 24, rng);
    const TriChannelImage gray(im[1], im[1], im[1]);
    const auto s = score_image(gray, random_masks(24, 24, 2, rng), sp);
    CHECK(s[0] == s[1]);
    CHECK(s[1] == s[2]);
    CHECK(s.finite());
}

TEST_CASE("score_image is permutation equivariant bit-exactly", "[scorer]") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const auto sp = ScorerParams<float>::create(kTiny, {"a", "b", "c"}, 100 + trial);
        const auto im = random_image(16 + trial, 16, rng);
        const auto masks = random_masks(16 + trial, 16, 3, rng);
        const auto s = score_image(im, masks, sp);
        for (const auto& p : ChannelPermutation::all()) {
            const auto sp_perm = score_image(permute_channels(im, p), masks, sp);
            for (int k = 0; k < 3; ++k) CHECK(sp_perm[k] == s[color_index(p.label(k))]);
        }
    }
}

TEST_CASE("pair scorer shape and determinism", "[scorer]") {
    Rng rng(6);
    const auto zero = PairScorerParams<float>::layout({4, 8, 8});
    const Plane z(16, 16);
    CHECK(score_pair(z, z, zero) == 0.0);

    const auto pp = PairScorerParams<float>::create(3, {4, 8, 8});
    const auto im = random_image(19, 23, rng);
    const double a = score_pair(im[0], im[1], pp);
    CHECK(score_pair(im[0], im[1], pp) == a);
    CHECK(std::isfinite(a));
    CHECK_THROWS_AS(score_pair(plane_tensor<float>(im[0]), pp), InputError);
    CHECK_THROWS_AS(score_pair(im[0], Plane(3, 3), pp), InputError);
}

TEST_CASE("parameter count follows the widths", "[scorer]") {
    // encoder: 1->w0, w0->w0, ...; decoder: up conv and merge conv per stage
    auto conv = [](int in, int out) { return static_cast<size_t>(out) * in * 9 + out; };
    const UNetWidths w = kPaperWidths;
    size_t expected = 0;
    int in = 1;
    for (int s = 0; s < 4; ++s) {
        expected += conv(in, w[s]) + conv(w[s], w[s]);
        in = w[s];
    }
    const std::array<int, 4> up{w[2], w[1], w[0], w[0]}, out{w[2], w[1], w[0], 1}, skip{w[3], w[2], w[1], w[0]};
    for (int k = 0; k < 4; ++k) {
        expected += conv(in, up[k]) + conv(up[k] + skip[k], out[k]);
        in = out[k];
    }
    const auto sp = ScorerParams<float>::layout(w, {"a", "b", "c", "d"});
    CHECK(sp.params.size() == expected + 4);
}
