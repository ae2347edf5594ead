#pragma once

#include <string>
#include <vector>

#include "netfrag/config.hpp"

namespace netfrag::harness {

struct RunRecord {
    uint64_t config_hash = 0;
    std::string code_version;
    std::string started_at;
    std::string finished_at;
    double wall_seconds = 0.0;
    std::string out_dir;
    std::vector<std::string> metrics_files;
    bool converged = false;
    bool accepted = false;
};

extern const char* const kCodeVersion;

// Output directory resolution: explicit config value, then $NETFRAG_OUT/<kind>-seed<seed>,
// then runs/<kind>-seed<seed>.
std::string resolve_out_dir(const ExperimentConfig& cfg);

// Runs the configured experiment, writing the resolved config, metrics
// files, snapshots and a summary into the output directory. Threshold
// misses are reported via `accepted`, not errors.
RunRecord run_experiment(const ExperimentConfig& cfg);

// Expands the glob (a '*'/'?' pattern on the filename part) and runs every
// matching config, at most `parallel` at a time. Returns the records in
// the expansion order.
std::vector<RunRecord> run_sweep(const std::string& glob_pattern, int parallel);

}  // namespace netfrag::harness
