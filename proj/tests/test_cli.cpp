#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "chorder/chorder.hpp"
#include "chorder/io.hpp"

using namespace chorder;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

struct WorkDir {
    fs::path path;
    WorkDir() : path(fs::temp_directory_path() / ("chorder_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~WorkDir() { fs::remove_all(path); }
};

const fs::path& work() {
    static const WorkDir dir;
    return dir.path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Run run(const std::string& args, const std::string& env = "") {
    const auto err = work() / "stderr.txt";
    const std::string cmd = env + " " CHORDER_BIN " " + args + " 2>" + err.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    const int st = ::pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = slurp(err);
    return r;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// shared fixture: a small corpus and a quickly trained orderer
struct Setup {
    fs::path corpus = work() / "corpus";
    fs::path cfg = work() / "train.cfg";
    fs::path ckpt = work() / "orderer.ckpt";
    Run synth, train;

    Setup() {
        write_text(work() / "spec.cfg", "height = 32\nwidth = 32\nseed = 4\n");
        write_text(cfg, "desk_scale = true\nepochs = 1\nwidths = 4,8,8,8\n");
        synth = run("synth --spec " + (work() / "spec.cfg").string() + " --count 30 --out " + corpus.string());
        train = run("--config " + cfg.string() + " train orderer --corpus " + corpus.string() + " --out " +
                    ckpt.string());
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

} // namespace

TEST_CASE("synth writes a corpus", "[cli]") {
    const auto& s = setup();
    INFO(s.synth.err);
    REQUIRE(s.synth.status == 0);
    CHECK_THAT(s.synth.out, ContainsSubstring("wrote 30 samples"));
    CHECK(load_corpus(s.corpus).size() == 30);
    CHECK(fs::exists(s.corpus / "manifest.json"));

    CHECK(run("synth --count 0 --out " + (work() / "zero").string()).status == 1);
    CHECK(run("synth --out " + (work() / "nocount").string()).status == 1);
    CHECK(run("frobnicate").status == 1);
}

TEST_CASE("train writes a checkpoint, log and manifest", "[cli]") {
    const auto& s = setup();
    INFO(s.train.err);
    REQUIRE(s.train.status == 0);
    const auto ckpt = load_checkpoint(s.ckpt);
    CHECK(ckpt.kind == ModelKind::orderer);
    CHECK(ckpt.meta.at("train_config").at("epochs") == 1);

    const auto log = slurp(s.ckpt.string() + ".log.csv");
    CHECK(log.rfind("epoch,lr,mean_loss\n", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') == 2);

    const auto manifest = nlohmann::json::parse(slurp(s.ckpt.string() + ".manifest.json"));
    CHECK(manifest.contains("seed"));
    // keys missing from the config file are reported with their defaults
    CHECK_THAT(s.train.err, ContainsSubstring("config key 'initial_lr' not set, using default 0.001"));
}

TEST_CASE("config precedence and errors", "[cli]") {
    const auto& s = setup();
    const auto out = work() / "flags.ckpt";
    const auto r = run("train shallow --corpus " + s.corpus.string() + " --out " + out.string() + " --epochs 2",
                       "CHORDER_CONFIG=" + s.cfg.string());
    INFO(r.err);
    REQUIRE(r.status == 0);
    CHECK(load_checkpoint(out).meta.at("train_config").at("epochs") == 2);
    CHECK(load_checkpoint(out).meta.at("train_config").at("batch_size") == 16);

    write_text(work() / "bad.cfg", "epochs = 1\nbogus_key = 3\n");
    const auto bad = run("--config " + (work() / "bad.cfg").string() + " train shallow --corpus " + s.corpus.string() +
                         " --out " + (work() / "bad.ckpt").string());
    CHECK(bad.status == 1);
    CHECK_THAT(bad.err, ContainsSubstring("bogus_key"));

    CHECK(run("train orderer --corpus " + (work() / "nowhere").string() + " --out x.ckpt").status == 1);
    CHECK(run("train resnet --corpus " + s.corpus.string() + " --out x.ckpt").status == 1);
}

TEST_CASE("eval prints the comparison table", "[cli]") {
    const auto& s = setup();
    REQUIRE(s.train.status == 0);
    const auto report = work() / "order.json";
    const auto r = run("eval order --ckpt " + s.ckpt.string() + " --corpus " + s.corpus.string() +
                       " --split all --report " + report.string());
    INFO(r.err);
    REQUIRE(r.status == 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    CHECK(header.rfind("| Method", 0) == 0);
    CHECK(std::count(header.begin(), header.end(), '|') == 9);
    for (const char* c : {"RGB", "RBG", "BGR", "BRG", "GBR", "GRB", "Overall"}) CHECK_THAT(header, ContainsSubstring(c));
    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j.at("task") == "order");
    CHECK(j.at("report").at("per_permutation").at("RGB").at("total") == 30);

    const auto gray = run("eval gray --ckpt " + s.ckpt.string() + " --corpus " + s.corpus.string() +
                          " --split all --plot " + (work() / "gray.png").string());
    INFO(gray.err);
    CHECK(gray.status == 0);
    CHECK_THAT(gray.out, ContainsSubstring("F1"));
    CHECK(fs::exists(work() / "gray.png"));

    const auto sweep = run("sweep-tau --ckpt " + s.ckpt.string() + " --corpus " + s.corpus.string() + " --split all");
    CHECK(sweep.status == 0);

    // an orderer checkpoint cannot answer the RGB/BGR task
    const auto wrong = run("eval bgr --ckpt " + s.ckpt.string() + " --corpus " + s.corpus.string());
    CHECK(wrong.status == 1);
    CHECK_THAT(wrong.err, ContainsSubstring("orderer"));
}

TEST_CASE("fix restores the detected layout", "[cli]") {
    const auto& s = setup();
    REQUIRE(s.train.status == 0);
    const auto in = work() / "fix_in";
    fs::create_directories(in / "images");
    fs::create_directories(in / "masks");
    const auto sample = load_corpus(s.corpus).front();
    const auto swapped = permute_channels(sample.image, ChannelPermutation::parse("GBR"));
    write_image(swapped, in / "images" / "a.png");
    write_label_map(sample.masks, in / "masks" / "a.png");
    const auto gray = luminance(sample.image);
    write_image(TriChannelImage(gray, gray, gray), in / "images" / "g.png");
    write_label_map(sample.masks, in / "masks" / "g.png");

    const auto out = work() / "fix_out";
    // a barely trained model has small score gaps; only exact gray stays below this tau
    const auto r = run("fix " + (in / "images").string() + " --gray-skip --tau 1e-9 --ckpt " + s.ckpt.string() + " --out " +
                       out.string());
    INFO(r.out << r.err);
    REQUIRE(r.status == 0);

    std::istringstream lines(r.out);
    std::string line;
    std::map<std::string, std::string> layout;
    while (std::getline(lines, line)) {
        const auto t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
        layout[fs::path(line.substr(0, t1)).filename().string()] = line.substr(t1 + 1, t2 - t1 - 1);
    }
    REQUIRE(layout.count("a.png"));
    CHECK(layout.at("g.png") == "NEARGRAY");
    CHECK(slurp(out / "g.png") == slurp(in / "images" / "g.png"));

    // whatever the model decided, the output is the input read under that layout
    const auto detected = ChannelPermutation::parse(layout.at("a.png"));
    CHECK(read_image(out / "a.png") == permute_channels(swapped, detected.inverse()));

    CHECK(run("fix " + (work() / "missing.png").string() + " --ckpt " + s.ckpt.string() + " --out " + out.string())
              .status == 2);
    CHECK(run("fix " + (in / "images" / "a.png").string() + " --ckpt " + s.ckpt.string()).status == 1);
    CHECK(run("fix " + (in / "images" / "a.png").string() + " --ckpt " + s.ckpt.string() + " --out " +
              (in / "images").string())
              .status == 2);
}
