#include "netfrag/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

namespace netfrag::harness {

ExperimentKind experiment_kind_from(const std::string& name) {
    if (name == "retinotopy") return ExperimentKind::retinotopy;
    if (name == "fragments") return ExperimentKind::fragments;
    if (name == "segment") return ExperimentKind::segment;
    if (name == "select") return ExperimentKind::select;
    if (name == "match") return ExperimentKind::match;
    throw InvalidArgument("unknown experiment kind: " + name);
}

const char* experiment_kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::retinotopy: return "retinotopy";
        case ExperimentKind::fragments: return "fragments";
        case ExperimentKind::segment: return "segment";
        case ExperimentKind::select: return "select";
        case ExperimentKind::match: return "match";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_scales(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt_double(v[i]);
    }
    return s;
}

// One settable key: parse assigns the value, render reports the current one.
struct KeyDef {
    std::function<void(ExperimentConfig&, const std::string&)> parse;
    std::function<std::string(const ExperimentConfig&)> render;
};

double parse_double(const std::string& section, const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidArgument("config: bad number for " + section + "." + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& section, const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidArgument("config: bad integer for " + section + "." + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& section, const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidArgument("config: bad integer for " + section + "." + key + ": '" + v + "'");
    }
}

std::vector<double> parse_list(const std::string& section, const std::string& key,
                               const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(section, key, item));
    }
    if (out.empty()) throw InvalidArgument("config: empty list for " + section + "." + key);
    return out;
}

using Schema = std::map<std::string, std::map<std::string, KeyDef>>;

#define KEY_D(sec, key, field)                                                               \
    {key,                                                                                    \
     KeyDef{[](ExperimentConfig& c, const std::string& v) { c.field = parse_double(sec, key, v); }, \
            [](const ExperimentConfig& c) { return fmt_double(c.field); }}}
#define KEY_I(sec, key, field)                                                            \
    {key, KeyDef{[](ExperimentConfig& c, const std::string& v) {                          \
                     c.field = static_cast<int>(parse_int(sec, key, v));                  \
                 },                                                                       \
                 [](const ExperimentConfig& c) { return std::to_string(c.field); }}}
#define KEY_S(sec, key, field)                                                       \
    {key, KeyDef{[](ExperimentConfig& c, const std::string& v) { c.field = v; },     \
                 [](const ExperimentConfig& c) { return c.field; }}}

const Schema& schema() {
    static const Schema s = {
        {"experiment",
         {
             {"kind",
              KeyDef{[](ExperimentConfig& c, const std::string& v) {
                         c.kind = experiment_kind_from(v);
                     },
                     [](const ExperimentConfig& c) { return experiment_kind_name(c.kind); }}},
             {"seed",
              KeyDef{[](ExperimentConfig& c, const std::string& v) {
                         c.seed = parse_u64("experiment", "seed", v);
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
             KEY_S("experiment", "out", out_dir),
             KEY_I("experiment", "snapshot_every", snapshot_every),
         }},
        {"selforg",
         {
             KEY_I("selforg", "retina_rows", selforg.retina_rows),
             KEY_I("selforg", "retina_cols", selforg.retina_cols),
             KEY_I("selforg", "tectum_rows", selforg.tectum_rows),
             KEY_I("selforg", "tectum_cols", selforg.tectum_cols),
             KEY_D("selforg", "alpha", selforg.alpha),
             KEY_D("selforg", "budget", selforg.budget),
             KEY_D("selforg", "blob_radius", selforg.blob_radius),
             KEY_I("selforg", "settle_steps", selforg.settle_steps),
             KEY_D("selforg", "settle_mass", selforg.settle_mass),
             KEY_I("selforg", "epochs", selforg.epochs),
             KEY_I("selforg", "events_per_epoch", selforg.events_per_epoch),
             KEY_D("selforg", "excite_amp", selforg.excite_amp),
             KEY_D("selforg", "excite_radius", selforg.excite_radius),
             KEY_D("selforg", "inhibit_radius", selforg.inhibit_radius),
             KEY_D("selforg", "inhibit_start", selforg.inhibit_start),
             KEY_D("selforg", "inhibit_end", selforg.inhibit_end),
             KEY_I("selforg", "inhibit_ramp_epochs", selforg.inhibit_ramp_epochs),
             KEY_D("selforg", "polarity_bias", selforg.polarity_bias),
             KEY_D("selforg", "init_noise", selforg.init_noise),
             KEY_I("selforg", "fan_in_cap", selforg.fan_in_cap),
             KEY_I("selforg", "prune_start_epoch", selforg.prune_start_epoch),
             KEY_D("selforg", "weight_min", selforg.weight_min),
             KEY_D("selforg", "epsilon_w_scale", selforg.epsilon_w_scale),
         }},
        {"fragments",
         {
             KEY_I("fragments", "image_size", fragments.image_size),
             KEY_I("fragments", "images_per_texture", fragments.images_per_texture),
             KEY_D("fragments", "jitter", fragments.jitter),
             KEY_D("fragments", "exuberance_q", fragments.engine.exuberance_q),
             KEY_D("fragments", "alpha", fragments.engine.alpha),
             KEY_D("fragments", "budget", fragments.engine.budget),
             KEY_D("fragments", "radius_rho", fragments.engine.radius_rho),
             KEY_I("fragments", "fan_in_cap", fragments.engine.fan_in_cap),
             KEY_I("fragments", "prune_every", fragments.engine.prune_every),
             KEY_D("fragments", "weight_min", fragments.engine.weight_min),
             KEY_D("fragments", "theta0", fragments.engine.theta0),
             KEY_D("fragments", "theta_growth", fragments.engine.theta_growth),
             KEY_D("fragments", "theta_max", fragments.engine.theta_max),
             KEY_D("fragments", "lambda", fragments.engine.lambda),
             KEY_I("fragments", "max_steps", fragments.engine.max_steps),
             KEY_D("fragments", "w_support_scale", fragments.engine.w_support_scale),
             KEY_D("fragments", "jaccard_merge", fragments.engine.jaccard_merge),
             KEY_I("fragments", "count_min", fragments.engine.count_min),
             KEY_I("fragments", "size_min", fragments.engine.size_min),
             KEY_I("fragments", "size_max", fragments.engine.size_max),
             KEY_S("fragments", "mode", fragments.mode),
             KEY_S("fragments", "field_in", fragments.field_in),
             KEY_S("fragments", "library_in", fragments.library_in),
         }},
        {"segment",
         {
             KEY_I("segment", "scenes", segment.scenes),
             KEY_I("segment", "scene_size", segment.scene_size),
             KEY_I("segment", "object_size", segment.object_size),
             KEY_D("segment", "object_jitter", segment.object_jitter),
             KEY_D("segment", "background_jitter", segment.background_jitter),
             KEY_I("segment", "train_images_per_texture", segment.train_images_per_texture),
             KEY_D("segment", "train_jitter", segment.train_jitter),
             KEY_D("segment", "exuberance_q", segment.engine.exuberance_q),
             KEY_D("segment", "alpha", segment.engine.alpha),
             KEY_D("segment", "theta_max", segment.engine.theta_max),
             KEY_D("segment", "w_support_scale", segment.engine.w_support_scale),
             KEY_I("segment", "fan_in_cap", segment.engine.fan_in_cap),
         }},
        {"select",
         {
             KEY_I("select", "trials", select.trials),
             KEY_D("select", "delta", select.delta),
             KEY_I("select", "size", select.size),
             KEY_D("select", "jitter", select.jitter),
             KEY_I("select", "train_images", select.train_images),
             KEY_D("select", "train_jitter", select.train_jitter),
             KEY_D("select", "exuberance_q", select.engine.exuberance_q),
             KEY_D("select", "alpha", select.engine.alpha),
             KEY_D("select", "theta_max", select.engine.theta_max),
             KEY_I("select", "fan_in_cap", select.engine.fan_in_cap),
         }},
        {"match",
         {
             KEY_I("match", "image_size", match.image_size),
             KEY_I("match", "queries", match.queries),
             KEY_I("match", "max_shift", match.max_shift),
             KEY_I("match", "k", match.k),
             KEY_I("match", "iterations", match.iterations),
             KEY_D("match", "eta", match.eta),
             KEY_D("match", "beta", match.beta),
             KEY_D("match", "epsilon0", match.epsilon0),
             KEY_D("match", "tolerance", match.tolerance),
             {"scales",
              KeyDef{[](ExperimentConfig& c, const std::string& v) {
                         c.match.scales = parse_list("match", "scales", v);
                     },
                     [](const ExperimentConfig& c) { return fmt_scales(c.match.scales); }}},
             KEY_D("match", "tau_rej", match.tau_rej),
             KEY_I("match", "noise_trials", match.noise_trials),
             KEY_S("match", "fg_texture", match.fg_texture),
             KEY_S("match", "bg_texture", match.bg_texture),
             KEY_D("match", "fg_jitter", match.fg_jitter),
             KEY_D("match", "bg_jitter", match.bg_jitter),
             KEY_I("match", "anchor_r", match.anchor_r),
             KEY_I("match", "anchor_c", match.anchor_c),
             KEY_S("match", "mode", match.mode),
             KEY_S("match", "store_in", match.store_in),
         }},
    };
    return s;
}

#undef KEY_D
#undef KEY_I
#undef KEY_S

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    const Schema& sch = schema();
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw InvalidArgument("config: malformed section header at line " +
                                      std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (sch.find(section) == sch.end()) {
                throw InvalidArgument("config: unknown section [" + section + "]");
            }
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("config: expected key=value at line " + std::to_string(line_no));
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw InvalidArgument("config: key '" + key + "' appears before any section");
        }
        auto sec_it = sch.find(section);
        auto key_it = sec_it->second.find(key);
        if (key_it == sec_it->second.end()) {
            throw InvalidArgument("config: unknown key '" + key + "' in section [" + section +
                                  "]");
        }
        key_it->second.parse(cfg, value);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw InvalidArgument("config: cannot open " + path);
    std::string text;
    char chunk[16384];
    size_t k;
    while ((k = std::fread(chunk, 1, sizeof(chunk), f)) > 0) text.append(chunk, k);
    std::fclose(f);
    return from_string(text);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [section, keys] : schema()) {
        for (const auto& [key, def] : keys) {
            out.emplace_back(section + "." + key, def.render(*this));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

uint64_t ExperimentConfig::config_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [k, v] : resolved()) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    return h;
}

std::string ExperimentConfig::resolved_text() const {
    std::string out;
    std::string current;
    for (const auto& [k, v] : resolved()) {
        size_t dot = k.find('.');
        std::string section = k.substr(0, dot);
        if (section != current) {
            if (!out.empty()) out += "\n";
            out += "[" + section + "]\n";
            current = section;
        }
        out += k.substr(dot + 1) + " = " + v + "\n";
    }
    return out;
}

}  // namespace netfrag::harness
