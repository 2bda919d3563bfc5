// chorder: command-line front end.
//
//   chorder synth --spec s.cfg --count 200 --out corpus/
//   chorder train orderer --corpus corpus/ --config desk.cfg --out m.ckpt
//   chorder eval order --ckpt m.ckpt --corpus corpus/ --report r.json
//   chorder eval gray --ckpt m.ckpt --corpus corpus/ --tau 0.4 --plot g.png
//   chorder fix img.png --ckpt m.ckpt --out fixed/ [--detect-only] [--gray-skip]
//   chorder sweep-tau --ckpt m.ckpt --corpus corpus/
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chorder/chorder.hpp"
#include "chorder/io.hpp"

#ifndef CHORDER_VERSION
#define CHORDER_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chorder;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr const char* kConfigEnv = "CHORDER_CONFIG";

void log_line(const std::string& msg) { std::cerr << "[chorder] " << msg << '\n'; }

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write " + path.string());
        out << text;
        if (!out) throw LoadError("failed writing " + path.string());
    }
    fs::rename(tmp, path);
}

struct RunManifest {
    fs::path path;
    json doc;

    void begin(const std::string& command, const std::vector<std::string>& argv, json config, uint64_t seed,
               const std::string& checkpoint, const std::string& corpus) {
        doc = {{"command", command},
               {"argv", argv},
               {"resolved_config", std::move(config)},
               {"seed", seed},
               {"checkpoint", checkpoint},
               {"corpus", corpus},
               {"started_at", utc_now()},
               {"tool_version", CHORDER_VERSION}};
        if (!path.empty()) write_text_atomic(path, doc.dump(2) + "\n");
    }

    void finish(int status) {
        if (path.empty() || doc.is_null()) return;
        doc["finished_at"] = utc_now();
        doc["exit_status"] = status;
        write_text_atomic(path, doc.dump(2) + "\n");
    }
};

/// Config file from --config, else $CHORDER_CONFIG, else empty.
FlatConfig load_config(const std::string& flag) {
    std::string path = flag;
    if (path.empty())
        if (const char* env = std::getenv(kConfigEnv); env && *env) {
            path = env;
            log_line(std::string("using config from $") + kConfigEnv + ": " + path);
        }
    if (path.empty()) return {};
    return FlatConfig::load(path);
}

void report_notes(const std::vector<std::string>& notes) {
    for (const auto& n : notes) log_line(n);
}

std::vector<Sample> load_split(const std::string& corpus, const std::string& split_name) {
    const auto all = load_corpus(corpus);
    if (all.empty()) throw ConfigError("corpus " + corpus + " holds no images");
    auto part = select_split(all, parse_split(split_name));
    if (part.empty()) throw ConfigError("split '" + split_name + "' of " + corpus + " is empty");
    log_line("loaded " + std::to_string(part.size()) + " of " + std::to_string(all.size()) + " samples (" +
             split_name + " split)");
    return part;
}

std::string percent(double v) { return format_percent(v) + "%"; }

// ---------------------------------------------------------------------------

struct CommonOptions {
    std::string config;
    std::string manifest;
    std::vector<std::string> argv;
};

struct SynthOptions {
    std::string spec;
    size_t count = 0;
    std::string out;
    std::optional<uint64_t> seed;
};

int cmd_synth(const SynthOptions& o, const CommonOptions& common) {
    std::vector<std::string> notes;
    FlatConfig f = o.spec.empty() ? FlatConfig{} : FlatConfig::load(o.spec);
    if (o.seed) f.set("seed", {std::to_string(*o.seed)});
    const auto spec = synth_spec_from(f, &notes);
    f.reject_unused();
    report_notes(notes);

    fs::create_directories(o.out);
    RunManifest manifest{common.manifest.empty() ? fs::path(o.out) / "manifest.json" : fs::path(common.manifest), {}};
    manifest.begin("synth", common.argv, to_json(spec), spec.seed, "", o.out);
    const auto corpus = generate_synthetic(spec, o.count);
    save_corpus(corpus, o.out);
    manifest.finish(kExitOk);
    std::cout << "wrote " << corpus.size() << " samples to " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string kind;
    std::string corpus;
    std::string out;
    std::string log;
    std::string split = "train";
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> lr;
    std::string link;
};

int cmd_train(const TrainOptions& o, const CommonOptions& common) {
    std::vector<std::string> notes;
    FlatConfig f = load_config(common.config);
    if (o.seed) f.set("seed", {std::to_string(*o.seed)});
    if (o.epochs) f.set("epochs", {std::to_string(*o.epochs)});
    if (o.batch_size) f.set("batch_size", {std::to_string(*o.batch_size)});
    if (o.lr) f.set("initial_lr", {CLI::detail::to_string(*o.lr)});
    if (!o.link.empty()) f.set("link", {o.link});
    const auto cfg = train_config_from(f, &notes);
    const double tau = gray_tau_from(f, &notes);
    f.reject_unused();
    report_notes(notes);
    const auto kind = parse_kind(o.kind);

    const auto corpus = load_split(o.corpus, o.split);
    auto resolved = to_json(cfg);
    resolved["tau"] = tau;
    resolved["split"] = o.split;
    RunManifest manifest{common.manifest.empty() ? fs::path(o.out + ".manifest.json") : fs::path(common.manifest), {}};
    manifest.begin("train " + o.kind, common.argv, resolved, cfg.seed, o.out, o.corpus);

    const fs::path log_path = o.log.empty() ? fs::path(o.out + ".log.csv") : fs::path(o.log);
    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw LoadError("cannot write training log " + log_path.string());
    log << "epoch,lr,mean_loss\n" << std::flush;
    const EpochCallback on_epoch = [&](int epoch, double lr, double loss) {
        char line[128];
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g", epoch, lr, loss);
        log << line << '\n' << std::flush;
        log_line("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " mean loss " +
                 std::to_string(loss));
    };

    TrainResult result;
    switch (kind) {
    case ModelKind::orderer: result = train_orderer(corpus, cfg, on_epoch); break;
    case ModelKind::bgr: result = train_bgr(corpus, cfg, on_epoch); break;
    case ModelKind::softmax6: result = train_softmax(corpus, cfg, 6, on_epoch); break;
    case ModelKind::softmax2: result = train_softmax(corpus, cfg, 2, on_epoch); break;
    case ModelKind::shallow: result = train_shallow(corpus, cfg, on_epoch); break;
    }
    result.checkpoint.meta["tau"] = tau;
    if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
    save_checkpoint(result.checkpoint, o.out);
    manifest.finish(kExitOk);
    std::cout << "wrote " << kind_name(kind) << " checkpoint " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string task;
    std::string ckpt;
    std::string corpus;
    std::string split = "test";
    std::optional<double> tau;
    std::string report;
    std::string plot;
    std::optional<uint64_t> gray_seed;
};

std::string method_name(ModelKind k) {
    switch (k) {
    case ModelKind::orderer: return "Chanel-Orderer";
    case ModelKind::bgr: return "Pair detector";
    case ModelKind::softmax6: return "Softmax-6";
    case ModelKind::softmax2: return "Softmax-2";
    case ModelKind::shallow: return "Histogram MLP";
    }
    return "unknown";
}

struct GrayModel {
    GrayStatistic stat;
    GrayRule rule = GrayRule::below;
    double default_tau = kDefaultGrayTau;
    std::string label;
};

/// Keeps the deserialized model alive for the statistic closure.
struct LoadedModel {
    Checkpoint ckpt;
    std::optional<ScorerParams<float>> scorer;
    std::optional<SoftmaxModel<float>> softmax;
    std::optional<ShallowModel<float>> shallow;
    std::optional<PairScorerParams<float>> pair;

    explicit LoadedModel(const std::string& path) : ckpt(load_checkpoint(path)) {
        switch (ckpt.kind) {
        case ModelKind::orderer: scorer = scorer_from_checkpoint(ckpt); break;
        case ModelKind::softmax6:
        case ModelKind::softmax2: softmax = softmax_from_checkpoint(ckpt); break;
        case ModelKind::shallow: shallow = shallow_from_checkpoint(ckpt); break;
        case ModelKind::bgr: pair = pair_scorer_from_checkpoint(ckpt); break;
        }
    }

    double stored_tau() const { return ckpt.meta.value("tau", kDefaultGrayTau); }

    GrayModel gray_model() const {
        if (scorer) return {orderer_gray_statistic(*scorer), GrayRule::below, stored_tau(), "max |score difference|"};
        if (softmax && softmax->classes == 6)
            return {softmax_entropy_statistic(*softmax), GrayRule::above, 1.79, "softmax entropy"};
        throw ConfigError("near-gray detection needs an orderer or softmax6 checkpoint, got '" + kind_name(ckpt.kind) +
                          "'");
    }

    uint64_t seed() const {
        if (ckpt.meta.contains("seed")) return ckpt.meta["seed"].get<uint64_t>();
        return 0;
    }

    GrayAugmentOptions gray_options() const {
        GrayAugmentOptions g;
        if (ckpt.meta.contains("train_config")) {
            const auto& c = ckpt.meta["train_config"];
            g.patch_probability = c.value("gray_patch_probability", g.patch_probability);
            g.max_patch_fraction = c.value("gray_max_patch_fraction", g.max_patch_fraction);
        }
        return g;
    }
};

void write_report(const std::string& path, const json& j) {
    if (!path.empty()) write_text_atomic(path, j.dump(2) + "\n");
}

std::string default_plot(const EvalOptions& o) {
    if (!o.plot.empty()) return o.plot;
    if (o.report.empty()) return {};
    return fs::path(o.report).replace_extension(".png").string();
}

std::string manifest_for(const CommonOptions& common, const std::string& report) {
    if (!common.manifest.empty()) return common.manifest;
    if (!report.empty()) return report + ".manifest.json";
    return {};
}

void print_gray(const GrayMetrics& m, const std::string& label) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "near-gray detection (%s, tau = %.6g): precision %.4f recall %.4f F1 %.4f  [tp %zu fp %zu fn %zu tn %zu]",
                  label.c_str(), m.tau, m.precision, m.recall, m.f1, m.true_positive, m.false_positive,
                  m.false_negative, m.true_negative);
    std::cout << buf << '\n';
}

int cmd_eval(const EvalOptions& o, const CommonOptions& common) {
    std::vector<std::string> notes;
    FlatConfig f = load_config(common.config);
    if (o.tau) f.set("tau", {CLI::detail::to_string(*o.tau)});
    const bool tau_given = f.has("tau");
    const double tau_cfg = gray_tau_from(f, nullptr);
    for (const auto& k : f.keys())
        if (k != "tau") f.raw(k);
    report_notes(notes);

    LoadedModel model(o.ckpt);
    const auto kind = model.ckpt.kind;
    if (o.task == "order" && !(model.scorer || model.shallow || (model.softmax && model.softmax->classes == 6)))
        throw ConfigError("task 'order' needs an orderer, softmax6 or shallow checkpoint, got '" + kind_name(kind) + "'");
    if (o.task == "bgr" && !(model.pair || (model.softmax && model.softmax->classes == 2)))
        throw ConfigError("task 'bgr' needs a bgr or softmax2 checkpoint, got '" + kind_name(kind) + "'");
    std::optional<GrayModel> gm;
    if (o.task == "gray") gm = model.gray_model();

    const auto corpus = load_split(o.corpus, o.split);
    json resolved = {{"task", o.task}, {"split", o.split}};
    if (gm) resolved["tau"] = tau_given ? tau_cfg : gm->default_tau;
    RunManifest manifest{manifest_for(common, o.report), {}};
    manifest.begin("eval " + o.task, common.argv, resolved, model.seed(), o.ckpt, o.corpus);

    json out = {{"task", o.task}, {"checkpoint_kind", kind_name(kind)}, {"split", o.split}};
    if (o.task == "order") {
        OrderPredictor predict = model.scorer    ? orderer_predictor(*model.scorer)
                                 : model.softmax ? softmax_predictor(*model.softmax)
                                                 : shallow_predictor(*model.shallow);
        auto rep = evaluate_ordering(predict, corpus);
        rep.method = method_name(kind);
        std::cout << format_table({rep});
        out["report"] = to_json(rep);
    } else if (o.task == "bgr") {
        const double acc = model.pair ? evaluate_bgr(pair_bgr_predictor(*model.pair), corpus)
                                      : evaluate_bgr(softmax_bgr_predictor(*model.softmax), corpus);
        std::cout << "RGB/BGR detection accuracy: " << percent(acc) << " over " << 2 * corpus.size() << " images\n";
        out["bgr_accuracy"] = acc;
        out["images"] = 2 * corpus.size();
    } else {
        if (!tau_given) log_line("tau not set, using default " + std::to_string(gm->default_tau));
        const double tau = tau_given ? tau_cfg : gm->default_tau;
        const auto set = make_gray_set(corpus, o.gray_seed.value_or(model.seed()), model.gray_options());
        const auto m = evaluate_neargray(gm->stat, set, tau, gm->rule);
        print_gray(m, gm->label);
        out["near_gray"] = to_json(m);
        out["statistic"] = gm->label;
        if (const auto plot = default_plot(o); !plot.empty()) {
            PlotOptions po;
            po.title = gm->label;
            plot_distributions(m.gray_statistics, m.color_statistics, tau, plot, po);
            std::cout << "wrote plot " << plot << '\n';
        }
    }
    write_report(o.report, out);
    manifest.finish(kExitOk);
    return kExitOk;
}

int cmd_sweep(const EvalOptions& o, const CommonOptions& common) {
    LoadedModel model(o.ckpt);
    const auto gm = model.gray_model();
    const auto corpus = load_split(o.corpus, o.split);
    RunManifest manifest{manifest_for(common, o.report), {}};
    manifest.begin("sweep-tau", common.argv, {{"split", o.split}}, model.seed(), o.ckpt, o.corpus);

    const auto set = make_gray_set(corpus, o.gray_seed.value_or(model.seed()), model.gray_options());
    const auto stats = gray_statistics(gm.stat, set);
    const auto best = sweep_tau(stats.gray, stats.color, gm.rule);
    if (best.degenerate) log_line("warning: statistics take fewer than two distinct values; tau is a fallback");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "best tau = %.6g (F1 %.4f on %zu images, %s split)", best.tau, best.f1,
                  stats.gray.size() + stats.color.size(), o.split.c_str());
    std::cout << buf << '\n';
    const auto m = gray_metrics(stats.gray, stats.color, best.tau, gm.rule);
    write_report(o.report, {{"tau", best.tau}, {"f1", best.f1}, {"degenerate", best.degenerate}, {"near_gray", to_json(m)}});
    if (const auto plot = default_plot(o); !plot.empty()) {
        PlotOptions po;
        po.title = gm.label;
        plot_distributions(stats.gray, stats.color, best.tau, plot, po);
    }
    manifest.finish(kExitOk);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FixOptions {
    std::vector<std::string> inputs;
    std::string ckpt;
    std::string out;
    std::string masks;
    bool detect_only = false;
    bool gray_skip = false;
    std::optional<double> tau;
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in))
                if (e.is_regular_file() && is_image_path(e.path())) found.push_back(e.path());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.emplace_back(in);
        }
    }
    return files;
}

/// --masks dir first, then the corpus layout sibling ../masks/<stem>.png.
std::optional<fs::path> find_mask(const fs::path& image, const std::string& mask_dir) {
    const auto name = image.stem().string() + ".png";
    if (!mask_dir.empty()) {
        const auto p = fs::path(mask_dir) / name;
        return fs::exists(p) ? std::optional(p) : std::nullopt;
    }
    const auto p = image.parent_path().parent_path() / "masks" / name;
    if (fs::exists(p)) return p;
    return std::nullopt;
}

bool same_file(const fs::path& a, const fs::path& b) {
    std::error_code ec;
    return fs::exists(b) && fs::equivalent(a, b, ec);
}

int cmd_fix(const FixOptions& o, const CommonOptions& common) {
    FlatConfig f = load_config(common.config);
    if (o.tau) f.set("tau", {CLI::detail::to_string(*o.tau)});
    for (const auto& k : f.keys())
        if (k != "tau") f.raw(k);
    LoadedModel model(o.ckpt);
    if (!model.scorer && !model.pair)
        throw ConfigError("fix needs an orderer or bgr checkpoint, got '" + kind_name(model.ckpt.kind) + "'");
    if (o.gray_skip && !model.scorer) throw ConfigError("--gray-skip needs an orderer checkpoint");
    const double tau = f.has("tau") ? gray_tau_from(f) : model.stored_tau();

    const auto files = expand_inputs(o.inputs);
    if (files.empty()) throw ConfigError("no input images");
    if (!o.detect_only) fs::create_directories(o.out);
    RunManifest manifest{common.manifest.empty() ? (o.detect_only ? fs::path() : fs::path(o.out) / "manifest.json")
                                                 : fs::path(common.manifest),
                         {}};
    manifest.begin("fix", common.argv,
                   {{"tau", tau}, {"detect_only", o.detect_only}, {"gray_skip", o.gray_skip}, {"masks", o.masks}},
                   model.seed(), o.ckpt, "");

    size_t ok = 0;
    for (const auto& file : files) {
        try {
            if (is_lossy_path(file)) log_line("warning: " + file.string() + " is lossy; restored pixels are not exact");
            const auto image = read_image(file);
            std::string layout, status;
            ChannelPermutation perm;
            bool passthrough = false;
            if (model.scorer) {
                const auto mask_path = find_mask(file, o.masks);
                if (!mask_path) throw LoadError("no mask found for " + file.string());
                int h = 0, w = 0;
                const auto labels = read_label_map(*mask_path, h, w);
                if (h != image.height() || w != image.width()) throw LoadError("mask size differs for " + file.string());
                const auto masks = MaskStack::from_label_map(h, w, labels, model.scorer->class_vocab);
                const auto scores = score_image(image, masks, *model.scorer);
                const auto pred = predict_order(scores);
                perm = pred.permutation;
                if (o.gray_skip && detect_near_gray(scores, tau).is_near_gray) passthrough = true;
            } else {
                perm = detect_bgr(image, *model.pair).label == BgrLabel::rgb ? ChannelPermutation::rgb()
                                                                              : ChannelPermutation::bgr();
            }
            layout = passthrough ? "NEARGRAY" : perm.name();
            if (o.detect_only) {
                status = "detected";
            } else {
                const auto target = fs::path(o.out) / (file.stem().string() + ".png");
                if (same_file(file, target)) throw LoadError("refusing to overwrite input " + file.string());
                if (passthrough || perm == ChannelPermutation::rgb()) {
                    if (file.extension() == ".png") fs::copy_file(file, target, fs::copy_options::overwrite_existing);
                    else write_image(image, target);
                    status = passthrough ? "passed through" : "unchanged";
                } else {
                    write_image(permute_channels(image, perm.inverse()), target);
                    status = "restored";
                }
                status += " -> " + target.string();
            }
            std::cout << file.string() << '\t' << layout << '\t' << status << '\n';
            ++ok;
        } catch (const std::exception& e) {
            log_line("warning: skipping " + file.string() + ": " + e.what());
        }
    }
    const int status = ok == 0 ? kExitRuntime : kExitOk;
    manifest.finish(status);
    if (ok == 0) log_line("no input could be processed");
    return status;
}

} // namespace

int main(int argc, char** argv) {
    // large conv temporaries are reused instead of being mapped per call
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);

    CLI::App app{"Channel-order detection and restoration"};
    app.set_version_flag("--version", CHORDER_VERSION);
    app.require_subcommand(1);
    CommonOptions common;
    common.argv.assign(argv, argv + argc);
    app.add_option("--config", common.config, std::string("Config file (default: $") + kConfigEnv + ")");
    app.add_option("--manifest", common.manifest, "Where to write the run manifest");
    app.fallthrough();

    SynthOptions so;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--spec", so.spec, "Synthetic corpus spec file")->check(CLI::ExistingFile);
    synth->add_option("--count", so.count, "Number of samples")->required()->check(CLI::PositiveNumber);
    synth->add_option("--out", so.out, "Output directory")->required();
    synth->add_option("--seed", so.seed, "Override the spec seed");

    TrainOptions to;
    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("kind", to.kind, "orderer | bgr | softmax6 | softmax2 | shallow")
        ->required()
        ->check(CLI::IsMember({"orderer", "bgr", "softmax6", "softmax2", "shallow"}));
    train->add_option("--corpus", to.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", to.out, "Checkpoint path")->required();
    train->add_option("--log", to.log, "Per-epoch CSV log (default: <out>.log.csv)");
    train->add_option("--split", to.split, "Corpus split")->check(CLI::IsMember({"train", "val", "test", "all"}));
    train->add_option("--seed", to.seed);
    train->add_option("--epochs", to.epochs)->check(CLI::PositiveNumber);
    train->add_option("--batch-size", to.batch_size)->check(CLI::PositiveNumber);
    train->add_option("--lr", to.lr)->check(CLI::PositiveNumber);
    train->add_option("--link", to.link)->check(CLI::IsMember({"tanh", "identity"}));

    EvalOptions eo;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("task", eo.task, "order | bgr | gray")->required()->check(CLI::IsMember({"order", "bgr", "gray"}));
    eval->add_option("--ckpt", eo.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--corpus", eo.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", eo.split, "Corpus split")->check(CLI::IsMember({"train", "val", "test", "all"}));
    eval->add_option("--tau", eo.tau, "Near-gray threshold")->check(CLI::PositiveNumber);
    eval->add_option("--report", eo.report, "Structured JSON report");
    eval->add_option("--plot", eo.plot, "Distribution plot (PNG)");
    eval->add_option("--gray-seed", eo.gray_seed, "Seed of the gray-augmented evaluation set");

    EvalOptions wo;
    wo.split = "val";
    auto* sweep = app.add_subcommand("sweep-tau", "Choose the near-gray threshold on held-out data");
    sweep->add_option("--ckpt", wo.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    sweep->add_option("--corpus", wo.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    sweep->add_option("--split", wo.split, "Corpus split")->check(CLI::IsMember({"train", "val", "test", "all"}));
    sweep->add_option("--report", wo.report, "Structured JSON report");
    sweep->add_option("--plot", wo.plot, "Distribution plot (PNG)");
    sweep->add_option("--gray-seed", wo.gray_seed, "Seed of the gray-augmented set");

    FixOptions fo;
    auto* fix = app.add_subcommand("fix", "Detect and restore channel order");
    fix->add_option("inputs", fo.inputs, "Images or directories")->required();
    fix->add_option("--ckpt", fo.ckpt, "orderer or bgr checkpoint")->required()->check(CLI::ExistingFile);
    fix->add_option("--out", fo.out, "Output directory");
    fix->add_option("--masks", fo.masks, "Directory of label maps named like the inputs");
    fix->add_flag("--detect-only", fo.detect_only, "Print layouts without writing images");
    fix->add_flag("--gray-skip", fo.gray_skip, "Pass near-gray inputs through unmodified");
    fix->add_option("--tau", fo.tau, "Near-gray threshold")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (fix->parsed() && !fo.detect_only && fo.out.empty()) {
        std::cerr << "fix: --out is required unless --detect-only is given\n";
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(so, common);
        if (train->parsed()) return cmd_train(to, common);
        if (eval->parsed()) return cmd_eval(eo, common);
        if (sweep->parsed()) return cmd_sweep(wo, common);
        if (fix->parsed()) return cmd_fix(fo, common);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << " (partial log kept)\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
