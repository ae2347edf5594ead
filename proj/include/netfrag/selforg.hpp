#pragma once

#include <functional>
#include <vector>

#include "netfrag/substrate.hpp"

namespace netfrag::selforg {

// Difference-of-Gaussians lateral interaction on grid distance.
struct LateralKernel {
    double excite_amp = 1.0;     // A_e
    double excite_radius = 1.5;  // r_e
    double inhibit_amp = 0.0;    // A_i
    double inhibit_radius = 4.0; // r_i, must exceed r_e

    double eval(double d) const;
};

struct SelfOrgConfig {
    int retina_rows = 16;
    int retina_cols = 16;
    int tectum_rows = 16;
    int tectum_cols = 16;

    double alpha = 0.02;          // Hebbian learning rate
    double budget = 1.0;          // incoming-sum target s
    double blob_radius = 2.0;     // stimulus blob sigma r_b
    int settle_steps = 10;
    double settle_mass = 6.0;     // activity mass bound M

    int epochs = 200;
    int events_per_epoch = 100;

    double excite_amp = 0.4;
    double excite_radius = 1.5;
    double inhibit_radius = 4.0;
    // A_i(epoch): linear ramp from start to end over ramp_epochs, then flat.
    double inhibit_start = 0.4;
    double inhibit_end = 2.0;
    int inhibit_ramp_epochs = 30;

    double polarity_bias = 0.2;   // b; 0 disables the anchor
    double init_noise = 0.1;

    int fan_in_cap = 12;
    int prune_start_epoch = 12;   // cap enforced from this epoch on
    double weight_min = 1e-3;     // w_min, absolute prune floor
    double epsilon_w_scale = 1e-3;  // eps_W = scale * s * N_post

    uint64_t seed = 1;

    double epsilon_w() const {
        return epsilon_w_scale * budget * tectum_rows * tectum_cols;
    }
    double inhibit_amp_at(int epoch) const;
};

struct RunTrace {
    std::vector<double> dw_l1;
    std::vector<double> neighbor_consistency;
    std::vector<double> affine_order;
    std::vector<double> mean_fan_in;
    bool converged = false;
    int converged_epoch = -1;  // first epoch of the 3-in-a-row window end
    // Run-long invariant audit: worst deviation of any post row sum from s
    // observed immediately after any normalize step.
    double max_budget_error = 0.0;
};

// Gaussian activity blob, peak 1 at a uniformly drawn center node,
// truncated at 3 * blob_radius.
ActivityState spontaneous_event(const Sheet& retina, double blob_radius, RngStream& rng);

// Same blob at a fixed center (deterministic variant used by tests).
ActivityState blob_at(const Sheet& retina, int center_r, int center_c, double blob_radius);

// Synchronous rectified relaxation: a <- rect(drive + K*a), then the total
// mass is divisively capped at `mass`. Starts from zero activity.
ActivityState settle(const Sheet& post_sheet, const std::vector<double>& drive,
                     const LateralKernel& kernel, int steps, double mass);

// w_ij += alpha * a_post[i] * a_pre[j] for co-active pairs; entries are
// created as needed.
void hebbian_step(WeightField& w, const ActivityState& a_pre, const ActivityState& a_post,
                  double alpha);

// Divisive rescale of every post row to sum s. In strict mode a zero-sum row
// raises DegenerateUnit; otherwise such rows are skipped (lateral fields
// grow connections incrementally and may leave units unconnected).
void normalize_incoming(WeightField& w, double s, bool strict = true);

// Drop weights below w_min; if more than fan_in_cap survive keep the largest
// (ties to the lower pre id); renormalize surviving rows to s.
void prune(WeightField& w, int fan_in_cap, double w_min, double s);

using SnapshotHook = std::function<void(int epoch, const WeightField&)>;

std::pair<WeightField, RunTrace> run_selforg(const SelfOrgConfig& cfg);
std::pair<WeightField, RunTrace> run_selforg(const SelfOrgConfig& cfg, const WeightField& start,
                                             const SnapshotHook& hook);

// Weight-weighted centroid of pre coordinates, as (row, col).
std::pair<double, double> receptive_center(const WeightField& w, uint32_t post_unit);

// Fraction of 4-neighbor post pairs whose receptive centers lie within
// 1.5 * (pre extent / post extent) grid units of each other.
double neighbor_consistency(const WeightField& w);

// Least-squares affine fit of receptive centers against post coordinates;
// score = max(0, 1 - RMS/R_half) * min(1, |det| / det_expected).
double affine_order(const WeightField& w);

// Best fixed-correspondence order over the 8 square symmetries: for each
// symmetry g, score = max(0, 1 - RMS(center_i - g(affine corr of i)) / R_half);
// returns the maximum.
double symmetry_aligned_order(const WeightField& w);

// Mean count of shared co-active neighbors over connected co-active pairs.
double path_redundancy(const WeightField& lateral_field, const std::vector<uint32_t>& active_set);

}  // namespace netfrag::selforg
