#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "chorder/checkpoint.hpp"
#include "chorder/data.hpp"

using namespace chorder;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("chorder_ckpt_" + std::to_string(Catch::getSeed()) + "_" +
                                            std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("orderer checkpoint round-trips bit-exactly", "[checkpoint]") {
    TempDir dir;
    const auto sp = ScorerParams<float>::create({2, 3, 4, 4}, {"sky", "skin"}, 17);
    const RankingConfig ranking{0.25, Link::identity};
    const auto file = dir.path / "m.ckpt";
    save_checkpoint(make_checkpoint(sp, ranking, {{"tau", 0.3}}), file);

    const auto loaded = load_checkpoint(file);
    CHECK(loaded.kind == ModelKind::orderer);
    CHECK(loaded.meta.at("tau").get<double>() == 0.3);
    CHECK(ranking_from_json(loaded.meta.at("ranking")).link == Link::identity);
    const auto back = scorer_from_checkpoint(loaded);
    CHECK(back.params == sp.params);
    CHECK(back.class_vocab == sp.class_vocab);
    CHECK(back.widths == sp.widths);

    const auto im = generate_synthetic(SynthSpec{}, 1)[0];
    auto masks = MaskStack(im.masks.height, im.masks.width, {"sky", "skin"});
    masks.masks[0] = im.masks.masks[0];
    masks.masks[1] = im.masks.masks[2];
    CHECK(score_image(im.image, masks, back) == score_image(im.image, masks, sp));
    CHECK_FALSE(fs::exists(file.string() + ".tmp"));
}

TEST_CASE("other model kinds round-trip", "[checkpoint]") {
    TempDir dir;
    const auto pp = PairScorerParams<float>::create(3, {4, 4, 8});
    save_checkpoint(make_checkpoint(pp, RankingConfig{}), dir.path / "b.ckpt");
    CHECK(pair_scorer_from_checkpoint(load_checkpoint(dir.path / "b.ckpt")).params == pp.params);

    const auto sm = SoftmaxModel<float>::create(2, {4, 4, 8, 8}, 1);
    save_checkpoint(make_checkpoint(sm), dir.path / "s.ckpt");
    const auto sl = load_checkpoint(dir.path / "s.ckpt");
    CHECK(sl.kind == ModelKind::softmax2);
    CHECK(softmax_from_checkpoint(sl).params == sm.params);

    const auto sh = ShallowModel<float>::create(5, 32, 8);
    save_checkpoint(make_checkpoint(sh), dir.path / "h.ckpt");
    const auto hl = shallow_from_checkpoint(load_checkpoint(dir.path / "h.ckpt"));
    CHECK(hl.params == sh.params);
    CHECK(hl.bins == 32);
}

TEST_CASE("kind mismatches are config errors", "[checkpoint]") {
    const auto c = make_checkpoint(ShallowModel<float>::create(1, 8, 2));
    CHECK_THROWS_AS(scorer_from_checkpoint(c), ConfigError);
    CHECK_THROWS_AS(softmax_from_checkpoint(c), ConfigError);
    CHECK(parse_kind("softmax6") == ModelKind::softmax6);
    CHECK_THROWS_AS(parse_kind("resnet"), ConfigError);
}

TEST_CASE("corrupt files are load errors", "[checkpoint]") {
    TempDir dir;
    CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.ckpt"), LoadError);

    {
        std::ofstream(dir.path / "junk.ckpt") << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(dir.path / "junk.ckpt"), LoadError);

    const auto good = dir.path / "good.ckpt";
    save_checkpoint(make_checkpoint(ShallowModel<float>::create(1, 8, 2)), good);
    const auto size = fs::file_size(good);
    fs::copy_file(good, dir.path / "short.ckpt");
    fs::resize_file(dir.path / "short.ckpt", size - 5);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "short.ckpt"), LoadError);

    // header bytes replaced by garbage
    std::string bytes;
    {
        std::ifstream in(good, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    bytes[25] = '\x01';
    {
        std::ofstream(dir.path / "bad.ckpt", std::ios::binary) << bytes;
    }
    CHECK_THROWS_AS(load_checkpoint(dir.path / "bad.ckpt"), LoadError);

    // layout that does not match the declared model
    auto c = load_checkpoint(good);
    c.meta["hidden"] = 3;
    CHECK_THROWS_AS(shallow_from_checkpoint(c), LoadError);
}
