#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "netfrag/fragments.hpp"
#include "netfrag/selforg.hpp"
#include "netfrag/substrate.hpp"

namespace netfrag::harness {

enum class ExperimentKind { retinotopy, fragments, segment, select, match };

ExperimentKind experiment_kind_from(const std::string& name);
const char* experiment_kind_name(ExperimentKind k);

// Corpus + engine parameters for the net-fragment experiments.
struct FragmentsExpConfig {
    int image_size = 32;
    int images_per_texture = 50;
    double jitter = 0.1;
    fragments::FragmentsConfig engine;
    std::string mode = "full";  // full | train | evoke
    std::string field_in;
    std::string library_in;
};

struct SegmentConfig {
    int scenes = 50;
    int scene_size = 32;
    int object_size = 12;
    double object_jitter = 0.05;
    double background_jitter = 0.3;
    int train_images_per_texture = 30;
    double train_jitter = 0.1;
    fragments::FragmentsConfig engine;
};

struct SelectConfig {
    int trials = 20;
    double delta = 0.2;
    int size = 32;
    double jitter = 0.05;
    int train_images = 60;
    double train_jitter = 0.05;
    fragments::FragmentsConfig engine;
};

struct MatchConfig {
    int image_size = 32;
    int queries = 100;
    int max_shift = 8;
    int k = 20;
    int iterations = 30;
    double eta = 0.5;
    double beta = 1.0;
    double epsilon0 = 0.05;
    double tolerance = 1.5;
    std::vector<double> scales = {0.8, 1.0, 1.25};
    double tau_rej = 0.4;
    int noise_trials = 100;
    std::string fg_texture = "checker";
    std::string bg_texture = "stripes_0";
    double fg_jitter = 0.0;
    double bg_jitter = 0.1;
    int anchor_r = 10;  // canonical sprite placement (pixel top-left)
    int anchor_c = 10;
    std::string mode = "full";  // full | store | query
    std::string store_in;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::retinotopy;
    uint64_t seed = 1;
    std::string out_dir;  // empty -> resolved by the runner
    int snapshot_every = 0;

    selforg::SelfOrgConfig selforg;
    FragmentsExpConfig fragments;
    SegmentConfig segment;
    SelectConfig select;
    MatchConfig match;

    // canonical "section.key" -> value pairs, sorted; basis of the hash and
    // of the resolved-config dump
    std::vector<std::pair<std::string, std::string>> resolved() const;
    uint64_t config_hash() const;
    std::string resolved_text() const;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);
};

}  // namespace netfrag::harness
