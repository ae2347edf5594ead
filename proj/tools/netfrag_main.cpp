#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "netfrag/experiments.hpp"
#include "netfrag/kernels.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    int snapshot_every = -1;
    std::string kernels = "openmp";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the experiment seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--snapshot-every", opts.snapshot_every, "snapshot cadence in epochs");
    cmd->add_option("--kernels", opts.kernels, "kernel execution mode: openmp|serial")
        ->check(CLI::IsMember({"openmp", "serial"}));
}

int run_one(const CommonOpts& opts, netfrag::harness::ExperimentKind kind,
            const std::string& mode) {
    using namespace netfrag::harness;
    netfrag::kernels::set_default_mode(opts.kernels == "serial"
                                           ? netfrag::kernels::ExecMode::serial
                                           : netfrag::kernels::ExecMode::openmp);
    ExperimentConfig cfg = ExperimentConfig::from_file(opts.config_path);
    cfg.kind = kind;
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.snapshot_every >= 0) cfg.snapshot_every = opts.snapshot_every;
    if (!mode.empty()) {
        if (kind == ExperimentKind::fragments) cfg.fragments.mode = mode;
        if (kind == ExperimentKind::match) cfg.match.mode = mode;
    }
    RunRecord rec = run_experiment(cfg);
    std::printf("%s: out=%s accepted=%s wall=%.2fs\n", experiment_kind_name(kind),
                rec.out_dir.c_str(), rec.accepted ? "true" : "false", rec.wall_seconds);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"netfrag-lab: self-organizing nets, net fragments and maplet matching"};
    app.require_subcommand(1);

    CommonOpts retino, frag, seg, sel, match;
    std::string frag_mode, match_mode;
    std::string sweep_glob;
    int sweep_parallel = 1;

    CLI::App* c_ret = app.add_subcommand("retinotopy", "self-organize a retinotopic map");
    add_common(c_ret, retino);

    CLI::App* c_frag = app.add_subcommand("fragments", "net-fragment experiments");
    c_frag->add_option("mode", frag_mode, "train|evoke|segment|select")
        ->check(CLI::IsMember({"train", "evoke", "segment", "select"}));
    add_common(c_frag, frag);

    CLI::App* c_seg = app.add_subcommand("segment", "figure-ground segmentation");
    add_common(c_seg, seg);

    CLI::App* c_sel = app.add_subcommand("select", "collective net selection");
    add_common(c_sel, sel);

    CLI::App* c_match = app.add_subcommand("match", "one-shot maplet matching");
    c_match->add_option("mode", match_mode, "store|query")
        ->check(CLI::IsMember({"store", "query"}));
    add_common(c_match, match);

    CLI::App* c_sweep = app.add_subcommand("sweep", "run every config matching a glob");
    c_sweep->add_option("--configs", sweep_glob, "config glob, e.g. configs/*.cfg")->required();
    c_sweep->add_option("--parallel", sweep_parallel, "concurrent runs");

    CLI11_PARSE(app, argc, argv);

    using netfrag::harness::ExperimentKind;
    try {
        if (c_ret->parsed()) return run_one(retino, ExperimentKind::retinotopy, "");
        if (c_frag->parsed()) {
            if (frag_mode == "segment") return run_one(frag, ExperimentKind::segment, "");
            if (frag_mode == "select") return run_one(frag, ExperimentKind::select, "");
            return run_one(frag, ExperimentKind::fragments,
                           frag_mode.empty() ? "full" : frag_mode);
        }
        if (c_seg->parsed()) return run_one(seg, ExperimentKind::segment, "");
        if (c_sel->parsed()) return run_one(sel, ExperimentKind::select, "");
        if (c_match->parsed()) {
            return run_one(match, ExperimentKind::match, match_mode.empty() ? "full" : match_mode);
        }
        if (c_sweep->parsed()) {
            auto records = netfrag::harness::run_sweep(sweep_glob, sweep_parallel);
            int accepted = 0;
            for (const auto& r : records) {
                if (r.accepted) ++accepted;
            }
            std::printf("sweep: %zu runs, %d accepted\n", records.size(), accepted);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
