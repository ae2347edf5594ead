#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace netfrag {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A post unit whose incoming weight sum is zero; carries the unit id.
struct DegenerateUnit : std::runtime_error {
    DegenerateUnit(const std::string& what, uint32_t unit_id)
        : std::runtime_error(what), unit(unit_id) {}
    uint32_t unit;
};

struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalFailure : std::runtime_error {
    NumericalFailure(const std::string& what, int at_epoch)
        : std::runtime_error(what), epoch(at_epoch) {}
    int epoch;
};

// 2D grid of units with `features` feature channels per node.
// Node ids are row-major; unit id = node * features + feature.
struct Sheet {
    int rows = 0;
    int cols = 0;
    int features = 1;

    int node_count() const { return rows * cols; }
    int unit_count() const { return rows * cols * features; }

    uint32_t node_of(int r, int c) const { return static_cast<uint32_t>(r * cols + c); }
    int node_row(uint32_t node) const { return static_cast<int>(node) / cols; }
    int node_col(uint32_t node) const { return static_cast<int>(node) % cols; }

    uint32_t unit_of(uint32_t node, int feature) const {
        return node * static_cast<uint32_t>(features) + static_cast<uint32_t>(feature);
    }
    uint32_t unit_node(uint32_t unit) const { return unit / static_cast<uint32_t>(features); }
    int unit_feature(uint32_t unit) const { return static_cast<int>(unit % static_cast<uint32_t>(features)); }

    bool same_shape(const Sheet& o) const {
        return rows == o.rows && cols == o.cols && features == o.features;
    }
};

Sheet new_sheet(int rows, int cols, int features);

// Nonnegative activity value per (node, feature) unit of one sheet.
struct ActivityState {
    Sheet sheet;
    std::vector<double> values;  // unit-indexed

    static ActivityState zeros(const Sheet& s) {
        return ActivityState{s, std::vector<double>(static_cast<size_t>(s.unit_count()), 0.0)};
    }

    double& at(uint32_t unit) { return values[unit]; }
    double at(uint32_t unit) const { return values[unit]; }
    double& at(uint32_t node, int f) { return values[sheet.unit_of(node, f)]; }

    // Units with value > 0, ascending.
    std::vector<uint32_t> active_units() const;
    double total() const;
};

// Counter-based generator (splitmix64 on a keyed counter). Identical
// (seed, stream) pairs produce identical sequences on any platform.
class RngStream {
public:
    RngStream(uint64_t seed, uint64_t stream);

    uint64_t next_u64();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double gaussian();                     // standard normal, Box-Muller
    int uniform_int(int n);                // {0, ..., n-1}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }
    uint64_t counter() const { return counter_; }

private:
    uint64_t seed_ = 0;
    uint64_t stream_ = 0;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

struct WeightEntry {
    uint32_t pre;
    double w;
};

// Nonnegative weighted connections from a pre sheet to a post sheet,
// stored as per-post adjacency lists sorted by pre unit id. Lateral
// fields (pre == post) forbid self-connections.
class WeightField {
public:
    WeightField() = default;
    WeightField(const Sheet& pre, const Sheet& post, bool lateral = false);

    const Sheet& pre_sheet() const { return pre_; }
    const Sheet& post_sheet() const { return post_; }
    bool lateral() const { return lateral_; }

    uint32_t post_units() const { return static_cast<uint32_t>(rows_.size()); }
    const std::vector<WeightEntry>& incoming(uint32_t post) const { return rows_[post]; }
    std::vector<WeightEntry>& incoming_mut(uint32_t post) { return rows_[post]; }

    double get(uint32_t post, uint32_t pre) const;
    void set(uint32_t post, uint32_t pre, double w);
    void add(uint32_t post, uint32_t pre, double dw);  // upsert, keeps row sorted
    void scale_row(uint32_t post, double factor);

    double incoming_sum(uint32_t post) const;
    size_t nonzero_count() const;
    double total_weight() const;
    bool all_finite() const;

    // L1 distance over the union of both fields' entries.
    static double l1_distance(const WeightField& a, const WeightField& b);
    bool equal_weights(const WeightField& o) const;

private:
    Sheet pre_;
    Sheet post_;
    bool lateral_ = false;
    std::vector<std::vector<WeightEntry>> rows_;
};

enum class InitMode { uniform_noise, polarity_biased, identity };

struct InitParams {
    InitMode mode = InitMode::uniform_noise;
    double noise_amplitude = 0.0;  // in [0, 1)
    double budget = 1.0;           // incoming-sum target s
    double polarity_bias = 0.0;    // b, used by polarity_biased
};

WeightField init_weight_field(const Sheet& pre, const Sheet& post,
                              const InitParams& params, RngStream& rng);

// Affine corner-to-corner correspondence: post coordinate -> pre coordinate.
void affine_pre_coord(const Sheet& pre, const Sheet& post, int post_r, int post_c,
                      double* pre_r, double* pre_c);

// Binary snapshot: magic "NFW1", version u32=1, pre_rows, pre_cols,
// post_rows, post_cols, F u32, count u64, then (post u32, pre u32, w f64)
// triples; little-endian throughout.
void write_snapshot(const WeightField& field, const std::string& path);
WeightField read_snapshot(const std::string& path, bool lateral = false);

}  // namespace netfrag
