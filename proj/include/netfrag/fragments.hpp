#pragma once

#include <array>
#include <string>
#include <vector>

#include "netfrag/substrate.hpp"

namespace netfrag::fragments {

// Fixed 3x3 filter bank: uniform-bright, uniform-dark, then oriented edge
// filters at 0/45/90/135 degrees in two polarities each. All filters have
// unit L2 norm; the edge filters sum to zero. Patches are centered at 0.5
// before filtering so that dark structure produces positive responses.
struct FeatureBank {
    static constexpr int kBright = 0;
    static constexpr int kDark = 1;
    static constexpr int kEdge0 = 2;    // +3 for opposite polarity
    static constexpr int kEdge45 = 4;
    static constexpr int kEdge90 = 6;
    static constexpr int kEdge135 = 8;

    std::vector<std::array<double, 9>> filters;
    double center = 0.5;

    static const FeatureBank& instance();
    int size() const { return static_cast<int>(filters.size()); }
};

struct GrayImage {
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels;  // row-major, values in [0, 1]

    double at(int r, int c) const { return pixels[static_cast<size_t>(r * cols + c)]; }
    double& at(int r, int c) { return pixels[static_cast<size_t>(r * cols + c)]; }
};

// Rectified, contrast-normalized filter responses per interior pixel.
// The output sheet is (rows-2) x (cols-2) with F = bank size; node (r, c)
// corresponds to pixel (r+1, c+1).
ActivityState feature_encode(const GrayImage& image, const FeatureBank& bank);

// Per node keep the top ceil(q * F) responding features (ties to the lower
// feature id) plus every feature within 80% of the node's maximum; values of
// kept units are the encoded responses, everything else is zeroed.
ActivityState exuberant_init(const ActivityState& features, double q);

struct FragmentsConfig {
    double exuberance_q = 0.1;
    double alpha = 0.1;
    double budget = 1.0;        // incoming-sum target s per unit
    double radius_rho = 3.0;    // lateral connection radius
    int fan_in_cap = 12;
    int prune_every = 10;       // images between prune passes
    double weight_min = 0.0;

    double theta0 = 0.1;
    double theta_growth = 1.15;
    double theta_max = 0.6;
    double lambda = 1.0;
    int max_steps = 400;

    double w_support_scale = 0.5;  // w_support = scale * s / cap
    double jaccard_merge = 0.6;
    int count_min = 5;
    int size_min = 5;
    int size_max = 60;

    double w_support() const { return w_support_scale * budget / fan_in_cap; }
};

// Feature sheet plus the learned short-range lateral excitatory field.
struct CorticalField {
    Sheet sheet;         // (node, feature) units, F = bank size
    WeightField lateral; // post <- pre over units, radius-limited
    double radius_rho = 3.0;
    double budget = 1.0;
};

// Statistical learning of lateral connections over an image corpus:
// encode -> exuberant init -> Hebbian co-activation within radius rho ->
// per-unit divisive normalization each image; fan-in prune every
// `prune_every` images.
CorticalField lateral_learn(const std::vector<GrayImage>& corpus, const FragmentsConfig& cfg);

struct ThresholdSchedule {
    double theta0 = 0.1;
    double growth = 1.15;  // g > 1
    double theta_max = 0.6;
    double lambda = 1.0;
    int max_steps = 400;

    static ThresholdSchedule from(const FragmentsConfig& cfg) {
        return ThresholdSchedule{cfg.theta0, cfg.theta_growth, cfg.theta_max, cfg.lambda,
                                 cfg.max_steps};
    }
};

struct SettleResult {
    ActivityState state;  // surviving units keep their feedforward values
    int steps = 0;
    int boundary_ties = 0;  // units kept with |support - theta| < 1e-12
};

// Shrinking threshold dynamics: unit u survives step t when
// ff_u + lambda * sum of incoming weights from currently active units
// >= theta(t), theta(t) = theta0 * g^t capped at theta_max. Terminates when
// the active set is stable with theta at its cap, or empty.
SettleResult settle_fragments(const ActivityState& active0, const CorticalField& field,
                              const ThresholdSchedule& sched);

struct NetFragment {
    int id = 0;
    // canonical members: (dr, dc, feature), translated to bounding-box origin
    std::vector<std::array<int, 3>> members;
    // undirected internal edges as member indices with their support weight
    std::vector<std::array<double, 3>> edges;  // (i, j, w)
    int count = 0;
    int source_tag = -1;  // corpus tag of the first contributing image
    int first_row = 0;    // node coords of the first occurrence
    int first_col = 0;
};

struct FragmentLibrary {
    std::vector<NetFragment> fragments;
};

// Settle every corpus image, split survivors into support components,
// canonicalize by translation, merge across images at member-set Jaccard >=
// cfg.jaccard_merge, then keep fragments with count >= count_min and size in
// [size_min, size_max]. `tags` labels each image (texture id) for provenance;
// may be empty.
FragmentLibrary extract_fragments(const std::vector<GrayImage>& corpus, const CorticalField& field,
                                  const FragmentsConfig& cfg, const std::vector<int>& tags = {});

// Jaccard index between the fragment placed at (row, col) and the stable
// set restricted to the fragment's spatial hull, maximized over translations
// within +/-2 nodes.
double reactivation_jaccard(const NetFragment& fragment, const ActivityState& stable, int row,
                            int col);

struct CoherentNet {
    // components sorted by size descending, ties by lowest min unit id;
    // unit ids ascending within each component
    std::vector<std::vector<uint32_t>> components;
};

// Connected components of the stable set under undirected support edges
// (either direction's weight >= w_support).
CoherentNet coherent_components(const ActivityState& stable, const CorticalField& field,
                                double w_support);

struct SegmentResult {
    GrayImage mask;  // 0/1 pixels, same size as the input image
    bool degenerate = false;
    double figure_mean_weight = 0.0;
    double ground_mean_weight = 0.0;
};

// Figure = largest coherent component whose mean internal support per member
// exceeds that of its complement; the mask covers the members' 3x3 receptive
// fields with 4-neighborhood holes filled. Scenes without a qualifying
// component (single-texture inputs) are flagged degenerate.
SegmentResult figure_ground(const GrayImage& image, const CorticalField& field,
                            const FragmentsConfig& cfg);

struct NetSelectionResult {
    int winner = -1;         // 0 or 1; -1 when no winner emerged
    bool no_winner = false;  // mixed state per the >0.5 overlap rule
    double purity = 0.0;     // |A ∩ P_w| / |P_w|
    double winner_overlap = 0.0;
    double loser_overlap = 0.0;
    double collapse_theta[2] = {0.0, 0.0};
    bool tie_broken = false;
    ActivityState final_state;
};

// Collective selection between two self-supporting pattern nets driven by an
// ambiguous input. The global threshold cap is raised (bisection over
// settle_fragments runs, which shrink monotonically in the cap) until exactly
// one pattern retains more than half of its units; the less consistent net
// collapses first. Patterns overlapping by more than 20% of the smaller
// pattern are rejected.
NetSelectionResult net_selection(const ActivityState& input, const CorticalField& field,
                                 const std::vector<uint32_t>& pattern0,
                                 const std::vector<uint32_t>& pattern1,
                                 const ThresholdSchedule& base);

// Library round-trip as a structured text file.
void write_fragment_library(const FragmentLibrary& lib, const std::string& path);
FragmentLibrary read_fragment_library(const std::string& path);

}  // namespace netfrag::fragments
