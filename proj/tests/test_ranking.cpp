#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "chorder/ranking.hpp"

using namespace chorder;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const RankingConfig kDefault{};

PairTargets uniform_targets(PairTarget t) {
    PairTargets y;
    y.y = {t, t, t};
    return y;
}

} // namespace

// reference values computed in 40-digit arithmetic
TEST_CASE("pair_probability reference values", "[ranking]") {
    CHECK_THAT(pair_probability(0.0, kDefault), WithinAbs(0.5, 1e-15));
    CHECK_THAT(pair_probability(3.0, kDefault), WithinRel(0.99995230076687475, 1e-12));
    CHECK_THAT(pair_probability(0.1, kDefault), WithinRel(0.73040531590832085, 1e-12));
    RankingConfig id{0.1, Link::identity};
    CHECK_THAT(pair_probability(0.1, id), WithinRel(1.0 / (1.0 + std::exp(-1.0)), 1e-12));
}

TEST_CASE("pair_probability is antisymmetric and monotone", "[ranking]") {
    double prev = 0.0;
    for (double d = -5.0; d <= 5.0; d += 0.05) {
        const double p = pair_probability(d, kDefault);
        CHECK(p > 0.0);
        CHECK(p < 1.0 + 1e-15);
        CHECK_THAT(p + pair_probability(-d, kDefault), WithinAbs(1.0, 1e-12));
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("pair_probability rejects non-finite input", "[ranking]") {
    CHECK_THROWS_AS(pair_probability(std::numeric_limits<double>::quiet_NaN(), kDefault), std::domain_error);
    CHECK_THROWS_AS(pair_probability(std::numeric_limits<double>::infinity(), kDefault), std::domain_error);
}

TEST_CASE("ranking_loss reference values", "[ranking]") {
    const ScoreTriple s{{1.0, 0.0, -1.0}};
    CHECK_THAT(ranking_loss(s, uniform_targets(PairTarget::precedes), kDefault),
               WithinRel(0.0010498839037121972, 1e-10));
    CHECK_THAT(ranking_loss(s, uniform_targets(PairTarget::follows), kDefault), WithinRel(24.873208803777179, 1e-12));
}

TEST_CASE("equal scores with half targets cost 3 ln 2", "[ranking]") {
    for (double v : {0.0, 0.3, -7.0}) {
        const ScoreTriple s{{v, v, v}};
        CHECK_THAT(ranking_loss(s, PairTargets{}, kDefault), WithinAbs(2.0794415416798359, 1e-9));
        for (double g : ranking_loss_grad(s, PairTargets{}, kDefault).s) CHECK_THAT(g, WithinAbs(0.0, 1e-9));
    }
    CHECK_THAT(loss_grad_delta(0.0, 0.5, kDefault), WithinAbs(0.0, 1e-12));
}

TEST_CASE("loss_grad_delta reference values", "[ranking]") {
    CHECK_THAT(loss_grad_delta(0.5, 0.0, kDefault), WithinRel(7.7878352218728755, 1e-12));
    CHECK_THAT(loss_grad_delta(0.5, 1.0, kDefault), WithinRel(-0.076642107786398579, 1e-10));
}

TEST_CASE("ranking_loss stays finite for large score gaps", "[ranking]") {
    RankingConfig id{0.1, Link::identity};
    const ScoreTriple s{{500.0, 0.0, -500.0}};
    const double l = ranking_loss(s, uniform_targets(PairTarget::follows), id);
    CHECK(std::isfinite(l));
    CHECK_THAT(l, WithinRel(5000.0 + 10000.0 + 5000.0, 1e-12));
    CHECK(ranking_loss(s, uniform_targets(PairTarget::precedes), id) >= 0.0);
}

TEST_CASE("analytic gradient matches central differences", "[ranking][property]") {
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> delta(-5.0, 5.0);
    std::bernoulli_distribution coin(0.5);
    const double h = 1e-5;
    int draws = 0;
    for (; draws < 1000; ++draws) {
        const double d = delta(gen);
        const double y = coin(gen) ? 1.0 : 0.0;
        const double analytic = loss_grad_delta(d, y, kDefault);
        const double numeric = (pair_loss(d + h, y, kDefault) - pair_loss(d - h, y, kDefault)) / (2 * h);
        REQUIRE_THAT(analytic, WithinRel(numeric, 1e-4));
        if (y == 1.0) REQUIRE(analytic < 0.0);
        else REQUIRE(analytic > 0.0);

        // the same through the three-pair loss, differentiating s1
        const PairTargets t = y == 1.0 ? uniform_targets(PairTarget::precedes) : uniform_targets(PairTarget::follows);
        const ScoreTriple s{{d, 0.25 * d, -0.5}};
        ScoreTriple up = s, down = s;
        up[0] += h;
        down[0] -= h;
        const double fd = (ranking_loss(up, t, kDefault) - ranking_loss(down, t, kDefault)) / (2 * h);
        REQUIRE_THAT(ranking_loss_grad(s, t, kDefault)[0], WithinRel(fd, 1e-4) || WithinAbs(fd, 1e-9));
    }
    CHECK(draws == 1000);
}

TEST_CASE("gradient components sum to zero", "[ranking]") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const ScoreTriple s{{n(gen), n(gen), n(gen)}};
        const auto t = pair_targets(ChannelPermutation::all()[i % 6]);
        const auto g = ranking_loss_grad(s, t, kDefault);
        CHECK_THAT(g[0] + g[1] + g[2], WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("pair_targets matches the enumerated table", "[ranking]") {
    using enum PairTarget;
    const std::map<std::string, PairTargets> table{
        {"RGB", {precedes, precedes, precedes}}, {"RBG", {precedes, precedes, follows}},
        {"GRB", {follows, precedes, precedes}},  {"GBR", {precedes, follows, follows}},
        {"BRG", {follows, follows, precedes}},   {"BGR", {follows, follows, follows}},
    };
    for (const auto& p : ChannelPermutation::all()) {
        INFO(p.name());
        CHECK(pair_targets(p) == table.at(p.name()));
    }
    CHECK(pair_targets(ChannelPermutation::gray()) == PairTargets{});
    CHECK(pair_targets(ChannelPermutation::rgb())[0] == 1.0);
    CHECK(pair_targets(ChannelPermutation::bgr())[2] == 0.0);
}

TEST_CASE("target consistency agrees with brute-force weak orders", "[ranking]") {
    // every ranking of 3 items into levels 0..2, ties allowed
    std::set<std::array<PairTarget, 3>> reachable;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const int r[3] = {a, b, c};
                std::array<PairTarget, 3> y{};
                for (size_t k = 0; k < kPairs.size(); ++k) {
                    const int ri = r[kPairs[k][0]], rj = r[kPairs[k][1]];
                    y[k] = ri > rj ? PairTarget::precedes : ri < rj ? PairTarget::follows : PairTarget::tied;
                }
                reachable.insert(y);
            }
    CHECK(reachable.size() == 13);
    int consistent = 0;
    for (int i = 0; i < 27; ++i) {
        PairTargets t;
        t.y = {static_cast<PairTarget>(i % 3), static_cast<PairTarget>(i / 3 % 3), static_cast<PairTarget>(i / 9)};
        CHECK(t.consistent() == (reachable.count(t.y) == 1));
        consistent += t.consistent();
    }
    CHECK(consistent == 13);
    using enum PairTarget;
    CHECK_THROWS_AS(PairTargets(precedes, follows, precedes), ConfigError);
}

TEST_CASE("relabeling the channels permutes the loss terms consistently", "[ranking]") {
    // scoring a layout sigma with scores s equals scoring RGB with the scores
    // moved back to their color positions
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const ScoreTriple by_color{{n(gen), n(gen), n(gen)}};
        const double ref = ranking_loss(by_color, pair_targets(ChannelPermutation::rgb()), kDefault);
        for (const auto& p : ChannelPermutation::all()) {
            ScoreTriple laid_out;
            for (int k = 0; k < 3; ++k) laid_out[k] = by_color[color_index(p.label(k))];
            CHECK_THAT(ranking_loss(laid_out, pair_targets(p), kDefault), WithinRel(ref, 1e-10));
        }
    }
}

TEST_CASE("config validation", "[ranking]") {
    CHECK_THROWS_AS((RankingConfig{0.0, Link::tanh}.validate()), ConfigError);
    CHECK_THROWS_AS((RankingConfig{-1.0, Link::tanh}.validate()), ConfigError);
    CHECK_NOTHROW(kDefault.validate());
    CHECK(parse_link("identity") == Link::identity);
    CHECK_THROWS_AS(parse_link("relu"), ConfigError);
}
