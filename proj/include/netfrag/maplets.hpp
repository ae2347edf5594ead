#pragma once

#include <string>
#include <vector>

#include "netfrag/substrate.hpp"

namespace netfrag::maplets {

// Cosine similarity of nonnegative feature vectors; 0 when both are zero.
double similarity(const std::vector<double>& a, const std::vector<double>& b);
double similarity(const double* a, const double* b, int n);

struct StoredModel {
    uint32_t id = 0;
    std::string label;
    Sheet sheet;                 // cropped feature field, F features per node
    std::vector<double> features;
    std::vector<uint8_t> mask;   // foreground flag per node
    int origin_row = 0;          // crop origin in the source field's node coords
    int origin_col = 0;
};

class ModelStore {
public:
    // Stores the feature field of `field` cropped to the mask's bounding
    // box. `node_mask` flags foreground nodes of the field's sheet.
    uint32_t store_model(const ActivityState& field, const std::vector<uint8_t>& node_mask,
                         const std::string& label);

    size_t size() const { return models_.size(); }
    const StoredModel& model(size_t i) const { return models_[i]; }
    const std::vector<StoredModel>& models() const { return models_; }

    void save(const std::string& path) const;
    static ModelStore load(const std::string& path);

private:
    std::vector<StoredModel> models_;
    uint32_t next_id_ = 0;
};

// Candidate correspondences for one model against one image field:
// for each model foreground node, the K image nodes of highest feature
// similarity (ties to the lower image node id).
struct LinkSet {
    Sheet image_sheet;
    Sheet model_sheet;
    std::vector<uint32_t> fg_nodes;   // model foreground node ids, ascending
    std::vector<uint32_t> begin;      // per fg node: [begin[i], begin[i+1]) links
    std::vector<uint32_t> u_node;     // image node per link
    std::vector<double> sim;          // static fitness per link
};

LinkSet build_links(const StoredModel& model, const ActivityState& image, int k);

struct RelaxParams {
    std::vector<double> scales = {0.8, 1.0, 1.25};
    int iterations = 30;
    double eta = 0.5;        // mixing, in (0, 1]
    double beta = 1.0;       // support weight
    double epsilon0 = 0.05;  // support floor
    double tolerance = 1.5;  // displacement-consistency tolerance, grid units
};

struct Transform {
    double dr = 0.0;
    double dc = 0.0;
    double sigma = 1.0;
};

struct CorrespondenceEntry {
    int v_row = 0;  // model node, crop-local
    int v_col = 0;
    int u_row = 0;  // image node
    int u_col = 0;
    double confidence = 0.0;  // sim(winner) * smooth(v)
};

struct CorrespondenceMap {
    std::vector<CorrespondenceEntry> entries;  // one per model foreground node
    double quality = 0.0;     // Q = mean confidence
    double smoothness = 0.0;  // mean smooth(v)
    double scale_hypothesis = 1.0;
    Transform transform;      // fit of u ~ sigma * (v + origin) + delta
};

// Synchronous relaxation of link activities toward a smooth correspondence,
// evaluated per scale hypothesis; the hypothesis with the highest map quality
// wins. The model's crop origin enters the fitted transform so that a
// self-match reports a near-zero translation.
CorrespondenceMap relax(const LinkSet& links, const RelaxParams& params, int origin_row = 0,
                        int origin_col = 0);

struct MatchResult {
    uint32_t id = 0;
    std::string label;
    double quality = 0.0;
    CorrespondenceMap map;
};

// Ranked match of every stored model against the image field, best quality
// first (ties to the lower model id).
std::vector<MatchResult> recognize(const ActivityState& image, const ModelStore& store,
                                   const RelaxParams& params, int k);

void write_map_csv(const CorrespondenceMap& map, const std::string& path);

}  // namespace netfrag::maplets
