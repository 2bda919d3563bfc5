#pragma once

// Image, label-map and corpus I/O plus the detection-statistic plot.
// Needs OpenCV (core, imgcodecs, imgproc).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "chorder/data.hpp"
#include "chorder/errors.hpp"
#include "chorder/image.hpp"

namespace chorder {

namespace fs = std::filesystem;

inline bool is_lossy_path(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".jpg" || ext == ".jpeg";
}

inline bool is_image_path(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Reads an 8-bit image as planes in file order (R, G, B), scaled to [0,1].
/// Single-channel files are replicated into all three planes.
inline TriChannelImage read_image(const fs::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw LoadError("cannot read image " + path.string());
    if (m.depth() != CV_8U) throw LoadError("only 8-bit images are supported: " + path.string());
    if (m.channels() == 1) cv::cvtColor(m, m, cv::COLOR_GRAY2RGB);
    else if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    else if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2RGB);
    else throw LoadError("unsupported channel count in " + path.string());
    TriChannelImage img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<uint8_t>(y);
        for (int x = 0; x < m.cols; ++x)
            for (int c = 0; c < 3; ++c) img[c].at(y, x) = static_cast<float>(row[3 * x + c]) / 255.0f;
    }
    return img;
}

/// Writes planes 0,1,2 as the file's R,G,B channels (8-bit PNG).
inline void write_image(const TriChannelImage& image, const fs::path& path) {
    image.validate();
    cv::Mat m(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < m.rows; ++y) {
        auto* row = m.ptr<uint8_t>(y);
        for (int x = 0; x < m.cols; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(image[2 - c].at(y, x)), 0.0, 1.0);
                row[3 * x + c] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
    }
    if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write image " + path.string());
}

/// Pixel value k+1 for a pixel in mask k, 0 where no mask is set.
inline std::vector<uint8_t> to_label_map(const MaskStack& masks) {
    std::vector<uint8_t> labels(masks.pixel_count(), 0);
    for (size_t i = 0; i < labels.size(); ++i)
        for (size_t k = 0; k < masks.class_count(); ++k)
            if (masks.masks[k][i]) {
                labels[i] = static_cast<uint8_t>(k + 1);
                break;
            }
    return labels;
}

inline void write_label_map(const MaskStack& masks, const fs::path& path) {
    const auto labels = to_label_map(masks);
    cv::Mat m(masks.height, masks.width, CV_8UC1, const_cast<uint8_t*>(labels.data()));
    if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write label map " + path.string());
}

inline std::vector<uint8_t> read_label_map(const fs::path& path, int& height, int& width) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw LoadError("cannot read label map " + path.string());
    if (m.depth() != CV_8U || m.channels() != 1)
        throw LoadError("label map must be 8-bit single-channel: " + path.string());
    height = m.rows;
    width = m.cols;
    std::vector<uint8_t> labels(static_cast<size_t>(m.rows) * m.cols);
    for (int y = 0; y < m.rows; ++y) std::copy_n(m.ptr<uint8_t>(y), m.cols, labels.data() + static_cast<size_t>(y) * m.cols);
    return labels;
}

inline std::vector<std::string> read_classes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read class manifest " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        names.push_back(line);
    }
    while (!names.empty() && names.back().empty()) names.pop_back();
    return names;
}

/// Loads root/images/<id>.{png,jpg}, root/masks/<id>.png and
/// root/classes.txt, sorted by id.
inline std::vector<Sample> load_corpus(const fs::path& root) {
    std::vector<Sample> out;
    if (!fs::is_directory(root)) throw LoadError("corpus directory not found: " + root.string());
    const auto images_dir = root / "images";
    if (!fs::is_directory(images_dir)) return out;

    std::map<std::string, fs::path> images;
    for (const auto& e : fs::directory_iterator(images_dir))
        if (e.is_regular_file() && is_image_path(e.path())) {
            const auto id = e.path().stem().string();
            if (!images.emplace(id, e.path()).second) throw LoadError("duplicate image id " + id);
        }
    if (images.empty()) return out;

    const auto vocab = read_classes(root / "classes.txt");
    if (vocab.empty()) throw LoadError("class manifest is empty");
    for (const auto& [id, path] : images) {
        const auto mask_path = root / "masks" / (id + ".png");
        if (!fs::exists(mask_path)) throw LoadError("missing mask for image '" + id + "'");
        Sample s;
        s.id = id;
        s.image = read_image(path);
        int h = 0, w = 0;
        const auto labels = read_label_map(mask_path, h, w);
        if (h != s.image.height() || w != s.image.width())
            throw LoadError("mask size differs from image size for '" + id + "'");
        try {
            s.masks = MaskStack::from_label_map(h, w, labels, vocab);
        } catch (const InputError& e) {
            throw LoadError("unknown class index in mask for '" + id + "': " + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void save_corpus(const std::vector<Sample>& corpus, const fs::path& root) {
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    if (corpus.empty()) return;
    {
        std::ofstream cls(root / "classes.txt", std::ios::trunc);
        if (!cls) throw LoadError("cannot write " + (root / "classes.txt").string());
        for (const auto& name : corpus.front().masks.class_vocab) cls << name << '\n';
    }
    for (const auto& s : corpus) {
        if (s.masks.class_vocab != corpus.front().masks.class_vocab)
            throw InputError("samples disagree on the class vocabulary");
        write_image(s.image, root / "images" / (s.id + ".png"));
        write_label_map(s.masks, root / "masks" / (s.id + ".png"));
    }
}

// ---------------------------------------------------------------------------
// Two-population histogram with a threshold line.

struct PlotOptions {
    int width = 640;
    int height = 400;
    int bins = 40;
    std::string title = "detection statistic";
    std::string first_label = "near-gray";
    std::string second_label = "color";
};

inline void plot_distributions(const std::vector<double>& first, const std::vector<double>& second, double threshold,
                               const fs::path& path, const PlotOptions& opt = {}) {
    double lo = threshold, hi = threshold;
    for (const auto* v : {&first, &second})
        for (double x : *v)
            if (std::isfinite(x)) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.02 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto histogram = [&](const std::vector<double>& v) {
        std::vector<double> h(opt.bins, 0.0);
        for (double x : v) {
            if (!std::isfinite(x)) continue;
            const int b = std::clamp(static_cast<int>((x - lo) / (hi - lo) * opt.bins), 0, opt.bins - 1);
            h[b] += 1.0;
        }
        for (auto& c : h) c /= std::max<size_t>(v.size(), 1);
        return h;
    };
    const auto h1 = histogram(first), h2 = histogram(second);
    double peak = 1e-12;
    for (size_t i = 0; i < h1.size(); ++i) peak = std::max({peak, h1[i], h2[i]});

    const int left = 50, right = 20, top = 40, bottom = 40;
    const int pw = opt.width - left - right, ph = opt.height - top - bottom;
    cv::Mat canvas(opt.height, opt.width, CV_8UC3, cv::Scalar(255, 255, 255));
    const double bw = static_cast<double>(pw) / opt.bins;
    auto draw = [&](const std::vector<double>& h, const cv::Scalar& color) {
        cv::Mat layer = canvas.clone();
        for (int b = 0; b < opt.bins; ++b) {
            const int bh = static_cast<int>(std::lround(h[b] / peak * ph));
            if (bh == 0) continue;
            cv::rectangle(layer, cv::Point(left + static_cast<int>(b * bw), top + ph - bh),
                          cv::Point(left + static_cast<int>((b + 1) * bw) - 1, top + ph), color, cv::FILLED);
        }
        cv::addWeighted(layer, 0.55, canvas, 0.45, 0.0, canvas);
    };
    draw(h1, cv::Scalar(60, 60, 60));
    draw(h2, cv::Scalar(200, 120, 30));

    cv::rectangle(canvas, cv::Point(left, top), cv::Point(left + pw, top + ph), cv::Scalar(0, 0, 0), 1);
    const int tx = left + static_cast<int>(std::lround((threshold - lo) / (hi - lo) * pw));
    cv::line(canvas, cv::Point(tx, top), cv::Point(tx, top + ph), cv::Scalar(0, 0, 220), 2);

    auto text = [&](const std::string& s, int x, int y, const cv::Scalar& c) {
        cv::putText(canvas, s, cv::Point(x, y), cv::FONT_HERSHEY_SIMPLEX, 0.45, c, 1, cv::LINE_AA);
    };
    char buf[64];
    text(opt.title, left, 20, cv::Scalar(0, 0, 0));
    std::snprintf(buf, sizeof(buf), "tau = %.4g", threshold);
    text(buf, std::min(tx + 4, left + pw - 90), top + 15, cv::Scalar(0, 0, 220));
    std::snprintf(buf, sizeof(buf), "%.3g", lo);
    text(buf, left, top + ph + 18, cv::Scalar(0, 0, 0));
    std::snprintf(buf, sizeof(buf), "%.3g", hi);
    text(buf, left + pw - 40, top + ph + 18, cv::Scalar(0, 0, 0));
    text(opt.first_label, left + pw - 150, 20, cv::Scalar(60, 60, 60));
    text(opt.second_label, left + pw - 60, 20, cv::Scalar(200, 120, 30));

    if (!cv::imwrite(path.string(), canvas)) throw LoadError("cannot write plot " + path.string());
}

} // namespace chorder
