#pragma once

// Flat key = value config files (INI syntax, '#' comments). Missing keys fall
// back to defaults and each fallback is reported; unknown keys are errors.
//
// Training / evaluation keys:
//   desk_scale              false   start from the CPU-sized preset
//   batch_size              48      (16 with desk_scale)
//   epochs                  100     (20 with desk_scale)
//   initial_lr              0.001
//   lr_decay                0.98    applied once per epoch
//   seed                    0
//   temperature             0.1
//   link                    tanh    tanh | identity
//   widths                  32,64,128,256  (8,16,32,64 with desk_scale)
//   gray_fraction           0.1
//   gray_patch_probability  0.5
//   gray_max_patch_fraction 0.03
//   pair_widths             16,32,64
//   histogram_bins          256
//   shallow_hidden          64
//   tau                     0.4     near-gray threshold
//
// Synthetic corpus keys: height, width, min_blobs, max_blobs,
// sky_probability, ground_probability, pixel_noise, seed, and per-class
// sections [class.<name>] with mean = r,g,b, jitter, brightness_jitter.
// Listing any class section replaces the default palette.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chorder/data.hpp"
#include "chorder/detectors.hpp"
#include "chorder/errors.hpp"
#include "chorder/train.hpp"

namespace chorder {

class FlatConfig {
public:
    FlatConfig() = default;

    static FlatConfig parse(std::istream& in) {
        FlatConfig c;
        std::vector<CLI::ConfigItem> items;
        try {
            items = CLI::ConfigINI().from_config(in);
        } catch (const CLI::Error& e) {
            throw ConfigError(std::string("malformed config: ") + e.what());
        }
        for (const auto& it : items) {
            if (it.name == "++" || it.name == "--") continue;
            const auto key = it.fullname();
            if (!c.values_.emplace(key, it.inputs).second) throw ConfigError("duplicate config key '" + key + "'");
            c.order_.push_back(key);
        }
        return c;
    }

    static FlatConfig parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static FlatConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file " + path.string());
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::vector<std::string>& keys() const { return order_; }

    void set(const std::string& key, std::vector<std::string> inputs) {
        if (!has(key)) order_.push_back(key);
        values_[key] = std::move(inputs);
    }

    /// Raw inputs for `key`; marks the key as consumed.
    const std::vector<std::string>& raw(const std::string& key) const {
        consumed_.insert(key);
        return values_.at(key);
    }

    template <class T>
    T get(const std::string& key, T fallback, std::vector<std::string>* notes = nullptr) const {
        if (!has(key)) {
            if (notes) notes->push_back("config key '" + key + "' not set, using default " + show(fallback));
            return fallback;
        }
        return convert<T>(key, raw(key));
    }

    /// Keys present in the file but never read.
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& k : order_)
            if (!consumed_.count(k)) out.push_back(k);
        return out;
    }

    void reject_unused() const {
        const auto u = unused();
        if (!u.empty()) throw ConfigError("unknown config key '" + u.front() + "'");
    }

private:
    std::map<std::string, std::vector<std::string>> values_;
    std::vector<std::string> order_;
    mutable std::set<std::string> consumed_;

    template <class T>
    static std::string show(const T& v) {
        std::ostringstream os;
        if constexpr (std::is_same_v<T, bool>) {
            os << (v ? "true" : "false");
        } else if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
            os << v;
        } else {
            bool first = true;
            for (const auto& x : v) {
                os << (first ? "" : ",") << x;
                first = false;
            }
        }
        return os.str();
    }

    template <class T>
    static T scalar(const std::string& key, const std::string& s) {
        T v{};
        if constexpr (std::is_same_v<T, bool>) {
            if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
            if (s == "false" || s == "0" || s == "no" || s == "off") return false;
            throw ConfigError("config key '" + key + "' expects a boolean, got '" + s + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
            return s;
        } else {
            if (!CLI::detail::lexical_cast(s, v))
                throw ConfigError("config key '" + key + "' has invalid value '" + s + "'");
            return v;
        }
    }

    template <class T>
    static T convert(const std::string& key, const std::vector<std::string>& in) {
        if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
            if (in.size() != 1) throw ConfigError("config key '" + key + "' expects one value");
            return scalar<T>(key, in.front());
        } else {
            T out{};
            using V = typename T::value_type;
            if constexpr (requires { out.push_back(V{}); }) {
                for (const auto& s : in) out.push_back(scalar<V>(key, s));
            } else {
                if (in.size() != out.size())
                    throw ConfigError("config key '" + key + "' expects " + std::to_string(out.size()) + " values");
                for (size_t i = 0; i < in.size(); ++i) out[i] = scalar<V>(key, in[i]);
            }
            return out;
        }
    }
};

inline TrainConfig train_config_from(const FlatConfig& f, std::vector<std::string>* notes = nullptr) {
    const bool desk = f.get("desk_scale", false, notes);
    TrainConfig c = desk ? TrainConfig::desk() : TrainConfig{};
    c.batch_size = f.get("batch_size", c.batch_size, notes);
    c.epochs = f.get("epochs", c.epochs, notes);
    c.initial_lr = f.get("initial_lr", c.initial_lr, notes);
    c.lr_decay = f.get("lr_decay", c.lr_decay, notes);
    c.seed = f.get("seed", c.seed, notes);
    c.ranking.temperature = f.get("temperature", c.ranking.temperature, notes);
    c.ranking.link = parse_link(f.get<std::string>("link", link_name(c.ranking.link), notes));
    c.widths = f.get("widths", c.widths, notes);
    c.gray_fraction = f.get("gray_fraction", c.gray_fraction, notes);
    c.gray_augment.patch_probability = f.get("gray_patch_probability", c.gray_augment.patch_probability, notes);
    c.gray_augment.max_patch_fraction = f.get("gray_max_patch_fraction", c.gray_augment.max_patch_fraction, notes);
    c.pair_widths = f.get("pair_widths", c.pair_widths, notes);
    c.histogram_bins = f.get("histogram_bins", c.histogram_bins, notes);
    c.shallow_hidden = f.get("shallow_hidden", c.shallow_hidden, notes);
    c.validate();
    return c;
}

inline double gray_tau_from(const FlatConfig& f, std::vector<std::string>* notes = nullptr) {
    const double tau = f.get("tau", kDefaultGrayTau, notes);
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    return tau;
}

/// Writes the flat keys that reproduce `c`.
inline std::string format_train_config(const TrainConfig& c, double tau = kDefaultGrayTau) {
    auto list = [](const auto& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    std::ostringstream os;
    os.precision(17);
    os << "desk_scale = false\n"
       << "batch_size = " << c.batch_size << "\n"
       << "epochs = " << c.epochs << "\n"
       << "initial_lr = " << c.initial_lr << "\n"
       << "lr_decay = " << c.lr_decay << "\n"
       << "seed = " << c.seed << "\n"
       << "temperature = " << c.ranking.temperature << "\n"
       << "link = " << link_name(c.ranking.link) << "\n"
       << "widths = " << list(c.widths) << "\n"
       << "gray_fraction = " << c.gray_fraction << "\n"
       << "gray_patch_probability = " << c.gray_augment.patch_probability << "\n"
       << "gray_max_patch_fraction = " << c.gray_augment.max_patch_fraction << "\n"
       << "pair_widths = " << list(c.pair_widths) << "\n"
       << "histogram_bins = " << c.histogram_bins << "\n"
       << "shallow_hidden = " << c.shallow_hidden << "\n"
       << "tau = " << tau << "\n";
    return os.str();
}

inline SynthSpec synth_spec_from(const FlatConfig& f, std::vector<std::string>* notes = nullptr) {
    SynthSpec s;
    s.height = f.get("height", s.height, notes);
    s.width = f.get("width", s.width, notes);
    s.min_blobs = f.get("min_blobs", s.min_blobs, notes);
    s.max_blobs = f.get("max_blobs", s.max_blobs, notes);
    s.sky_probability = f.get("sky_probability", s.sky_probability, notes);
    s.ground_probability = f.get("ground_probability", s.ground_probability, notes);
    s.pixel_noise = f.get("pixel_noise", s.pixel_noise, notes);
    s.seed = f.get("seed", s.seed, notes);

    std::vector<std::string> names;
    for (const auto& k : f.keys()) {
        if (k.rfind("class.", 0) != 0) continue;
        const auto dot = k.rfind('.');
        if (dot <= 6) throw ConfigError("class keys look like class.<name>.<field>: '" + k + "'");
        const auto name = k.substr(6, dot - 6);
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    if (!names.empty()) {
        s.palette.clear();
        for (const auto& n : names) {
            ClassColor c{n};
            const auto p = "class." + n + ".";
            if (!f.has(p + "mean")) throw ConfigError("class '" + n + "' needs a mean");
            c.mean = f.get(p + "mean", c.mean);
            c.jitter = f.get(p + "jitter", c.jitter, notes);
            c.brightness_jitter = f.get(p + "brightness_jitter", c.brightness_jitter, notes);
            s.palette.push_back(c);
        }
    } else if (notes) {
        notes->push_back("no [class.<name>] sections, using the default palette");
    }
    s.validate();
    return s;
}

inline nlohmann::json to_json(const SynthSpec& s) {
    auto palette = nlohmann::json::array();
    for (const auto& c : s.palette)
        palette.push_back({{"name", c.name}, {"mean", c.mean}, {"jitter", c.jitter},
                           {"brightness_jitter", c.brightness_jitter}});
    return {{"height", s.height},
            {"width", s.width},
            {"min_blobs", s.min_blobs},
            {"max_blobs", s.max_blobs},
            {"sky_probability", s.sky_probability},
            {"ground_probability", s.ground_probability},
            {"pixel_noise", s.pixel_noise},
            {"seed", s.seed},
            {"palette", palette}};
}

} // namespace chorder
