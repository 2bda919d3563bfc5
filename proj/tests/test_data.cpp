#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <set>

#include "chorder/data.hpp"

using namespace chorder;
using Catch::Matchers::WithinAbs;

namespace {

SynthSpec small_spec(uint64_t seed = 5) {
    SynthSpec s;
    s.height = 24;
    s.width = 32;
    s.seed = seed;
    return s;
}

double mean_over(const Plane& p, std::span<const uint8_t> mask) {
    double sum = 0.0, n = 0.0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            sum += p.values[i];
            n += 1.0;
        }
    return n > 0 ? sum / n : 0.0;
}

} // namespace

TEST_CASE("permutations form a group acting on images", "[data]") {
    const auto corpus = generate_synthetic(small_spec(), 2);
    const auto& im = corpus[0].image;
    for (const auto& p : ChannelPermutation::all()) {
        CHECK(permute_channels(permute_channels(im, p), p.inverse()) == im);
        CHECK(p.then(p.inverse()) == ChannelPermutation::rgb());
        CHECK(ChannelPermutation::parse(p.name()) == p);
        for (const auto& q : ChannelPermutation::all())
            CHECK(permute_channels(permute_channels(im, p), q) == permute_channels(im, p.then(q)));
    }
    const auto bgr = permute_channels(im, ChannelPermutation::bgr());
    CHECK(bgr[0] == im[2]);
    CHECK(bgr[1] == im[1]);
    CHECK(bgr[2] == im[0]);
    CHECK_THROWS_AS(permute_channels(im, ChannelPermutation::gray()), ConfigError);
    CHECK_THROWS_AS(ChannelPermutation::parse("RRB"), ConfigError);
}

TEST_CASE("expansion modes", "[data]") {
    const auto s = generate_synthetic(small_spec(), 1)[0];
    const auto all = expand_permutations(s, ExpandMode::all6);
    REQUIRE(all.size() == 6);
    std::set<std::string> names;
    for (const auto& p : all) {
        names.insert(p.true_perm.name());
        CHECK(p.targets == pair_targets(p.true_perm));
        CHECK(p.masks == s.masks);
        CHECK(p.id == s.id);
    }
    CHECK(names.size() == 6);

    const auto two = expand_permutations(s, ExpandMode::rgb_bgr);
    REQUIRE(two.size() == 2);
    CHECK(two[0].image == s.image);
    CHECK(two[1].true_perm == ChannelPermutation::bgr());

    CHECK_THROWS_AS(expand_permutations(s, ExpandMode::single_random), ConfigError);
    Rng rng(9);
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) seen.insert(expand_permutations(s, ExpandMode::single_random, &rng)[0].true_perm.index());
    CHECK(seen.size() == 6);
}

TEST_CASE("synthetic generator is deterministic and well formed", "[data]") {
    const auto a = generate_synthetic(small_spec(), 12);
    const auto b = generate_synthetic(small_spec(), 12);
    const auto c = generate_synthetic(small_spec(6), 12);
    int differing = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image == b[i].image);
        CHECK(a[i].masks == b[i].masks);
        CHECK(a[i].id == synthetic_id(i));
        CHECK(generate_synthetic_sample(small_spec(), i).image == a[i].image);
        differing += !(a[i].image == c[i].image);

        CHECK(a[i].image.height() == 24);
        CHECK(a[i].image.width() == 32);
        for (const auto& p : a[i].image.planes)
            for (float v : p.values) {
                REQUIRE(v >= 0.0f);
                REQUIRE(v <= 1.0f);
                REQUIRE(std::round(v * 255.0f) == v * 255.0f);
            }
        // every pixel belongs to exactly one class
        const auto& m = a[i].masks;
        CHECK_NOTHROW(m.validate());
        for (size_t px = 0; px < m.pixel_count(); ++px) {
            int owners = 0;
            for (const auto& mask : m.masks) owners += mask[px];
            REQUIRE(owners == 1);
        }
    }
    CHECK(differing == 12);
    CHECK_THROWS_AS(generate_synthetic(small_spec(), 0), ConfigError);
}

TEST_CASE("synthetic skin keeps red above blue", "[data]") {
    const auto spec = small_spec(11);
    const auto corpus = generate_synthetic(spec, 200);
    const int skin = spec.class_index("skin");
    int with_skin = 0, red_above_blue = 0;
    for (const auto& s : corpus) {
        const auto mask = s.masks.mask(skin);
        if (std::accumulate(mask.begin(), mask.end(), 0) == 0) continue;
        ++with_skin;
        red_above_blue += mean_over(s.image[0], mask) > mean_over(s.image[2], mask);
    }
    REQUIRE(with_skin > 150);
    CHECK(red_above_blue >= 0.95 * with_skin);
}

TEST_CASE("synthetic spec validation", "[data]") {
    auto s = small_spec();
    s.palette[0].mean[1] = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec();
    s.min_blobs = 4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec();
    s.palette.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("grayscale augmentation", "[data]") {
    const auto corpus = generate_synthetic(small_spec(), 30);
    Rng rng(4);

    const auto plain = grayscale_augment(corpus[0], rng, {0.0, 0.03});
    CHECK(plain.image[0] == plain.image[1]);
    CHECK(plain.image[1] == plain.image[2]);
    CHECK(plain.true_perm.is_gray());
    for (size_t k = 0; k < 3; ++k) CHECK(plain.targets[k] == 0.5);
    CHECK(plain.image[0] == luminance(corpus[0].image));

    // a color patch under 5% of the area leaves the image close to gray
    int patched = 0;
    for (const auto& s : corpus) {
        const auto g = grayscale_augment(s, rng, {1.0, 0.04});
        patched += !(g.image[0] == g.image[2]);
        double diff = 0.0;
        for (size_t i = 0; i < g.image.pixel_count(); ++i) {
            const float a = g.image[0].values[i], b = g.image[1].values[i], c = g.image[2].values[i];
            diff += std::max({a, b, c}) - std::min({a, b, c});
        }
        CHECK(diff / g.image.pixel_count() < 0.02);
        for (size_t k = 0; k < 3; ++k) CHECK(g.targets[k] == 0.5);
    }
    CHECK(patched > 20);
}

TEST_CASE("splits are fixed by id", "[data]") {
    const auto corpus = generate_synthetic(small_spec(), 400);
    const auto train = select_split(corpus, Split::train);
    const auto val = select_split(corpus, Split::val);
    const auto test = select_split(corpus, Split::test);
    CHECK(train.size() + val.size() + test.size() == corpus.size());
    CHECK(train.size() > 280);
    CHECK(val.size() > 20);
    CHECK(test.size() > 20);
    std::set<std::string> ids;
    for (const auto* part : {&train, &val, &test})
        for (const auto& s : *part) ids.insert(s.id);
    CHECK(ids.size() == corpus.size());
    CHECK(split_of("synth_000007") == split_of("synth_000007"));
    CHECK(select_split(corpus, Split::all).size() == corpus.size());
    CHECK(parse_split("val") == Split::val);
    CHECK_THROWS_AS(parse_split("dev"), ConfigError);
}
