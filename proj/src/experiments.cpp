#include "netfrag/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "netfrag/fragments.hpp"
#include "netfrag/kernels.hpp"
#include "netfrag/maplets.hpp"
#include "netfrag/selforg.hpp"
#include "netfrag/textures.hpp"

namespace netfrag::harness {

const char* const kCodeVersion = "netfrag 0.1.0";

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using fragments::GrayImage;

namespace {

// rng stream ids per purpose; runs derive everything from (seed, stream)
enum Stream : uint64_t {
    kStreamCorpus = 10,
    kStreamProbe = 11,
    kStreamTrain = 20,
    kStreamScenes = 21,
    kStreamSelectTrain = 30,
    kStreamSelectTrial = 1000,
    kStreamMatchStore = 40,
    kStreamMatchQuery = 41,
    kStreamMatchNoise = 42,
};

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot open for writing: " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

struct CsvWriter {
    std::string buf;
    void row(const std::string& line) {
        buf += line;
        buf += "\n";
    }
    void save(const std::string& path) const { write_text(path, buf); }
};

std::string fmt(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.10g", v);
    return b;
}

std::vector<GrayImage> texture_corpus(int images_per_texture, int size, double jitter,
                                      RngStream& rng, std::vector<int>* tags) {
    std::vector<GrayImage> corpus;
    for (int i = 0; i < images_per_texture * 4; ++i) {
        int t = i % 4;
        corpus.push_back(
            generate_texture_mosaic(static_cast<TextureKind>(t), size, jitter, rng));
        if (tags) tags->push_back(t);
    }
    return corpus;
}

// ---------------------------------------------------------------- retinotopy

json run_retinotopy(const ExperimentConfig& cfg, const std::string& out, RunRecord& rec) {
    selforg::SelfOrgConfig sc = cfg.selforg;
    sc.seed = cfg.seed;

    RngStream init_rng(sc.seed, 1);
    InitParams ip;
    ip.mode = sc.polarity_bias != 0.0 ? InitMode::polarity_biased : InitMode::uniform_noise;
    ip.noise_amplitude = sc.init_noise;
    ip.budget = sc.budget;
    ip.polarity_bias = sc.polarity_bias;
    Sheet retina = new_sheet(sc.retina_rows, sc.retina_cols, 1);
    Sheet tectum = new_sheet(sc.tectum_rows, sc.tectum_cols, 1);
    WeightField w0 = init_weight_field(retina, tectum, ip, init_rng);

    selforg::SnapshotHook hook;
    if (cfg.snapshot_every > 0) {
        int every = cfg.snapshot_every;
        std::string dir = out;
        hook = [every, dir](int epoch, const WeightField& w) {
            if ((epoch + 1) % every == 0) {
                char name[64];
                std::snprintf(name, sizeof(name), "/snap_%04d.nfw", epoch);
                write_snapshot(w, dir + name);
            }
        };
    }

    auto [w, trace] = selforg::run_selforg(sc, w0, hook);

    CsvWriter metrics;
    metrics.row("epoch,dW_l1,neighbor_consistency,affine_order,mean_fan_in");
    for (size_t e = 0; e < trace.dw_l1.size(); ++e) {
        metrics.row(std::to_string(e) + "," + fmt(trace.dw_l1[e]) + "," +
                    fmt(trace.neighbor_consistency[e]) + "," + fmt(trace.affine_order[e]) + "," +
                    fmt(trace.mean_fan_in[e]));
    }
    metrics.save(out + "/metrics.csv");
    rec.metrics_files.push_back(out + "/metrics.csv");
    write_snapshot(w, out + "/final.nfw");

    // receptive-center field as a 16-bit graymap pair
    {
        std::vector<uint16_t> xs, ys;
        double er = std::max(retina.rows - 1, 1);
        double ec = std::max(retina.cols - 1, 1);
        for (uint32_t i = 0; i < w.post_units(); ++i) {
            auto [r, c] = selforg::receptive_center(w, i);
            ys.push_back(static_cast<uint16_t>(
                std::lround(std::clamp(r / er, 0.0, 1.0) * 65535.0)));
            xs.push_back(static_cast<uint16_t>(
                std::lround(std::clamp(c / ec, 0.0, 1.0) * 65535.0)));
        }
        write_pgm16(out + "/centers_x.pgm", tectum.rows, tectum.cols, xs);
        write_pgm16(out + "/centers_y.pgm", tectum.rows, tectum.cols, ys);
    }

    double nc = trace.neighbor_consistency.empty() ? 0.0 : trace.neighbor_consistency.back();
    double ao = trace.affine_order.empty() ? 0.0 : trace.affine_order.back();
    double aligned = selforg::symmetry_aligned_order(w);

    size_t max_fan_in = 0;
    for (uint32_t i = 0; i < w.post_units(); ++i) {
        max_fan_in = std::max(max_fan_in, w.incoming(i).size());
    }
    bool fan_in_monotone = true;
    for (size_t e = static_cast<size_t>(std::max(sc.prune_start_epoch - 1, 0)) + 1;
         e < trace.mean_fan_in.size(); ++e) {
        if (trace.mean_fan_in[e] > trace.mean_fan_in[e - 1] + 1e-9) fan_in_monotone = false;
    }

    json s;
    s["kind"] = "retinotopy";
    s["epochs_run"] = trace.dw_l1.size();
    s["converged"] = trace.converged;
    s["converged_epoch"] = trace.converged_epoch;
    s["neighbor_consistency"] = nc;
    s["affine_order"] = ao;
    s["aligned_order"] = aligned;
    s["max_budget_error"] = trace.max_budget_error;
    s["max_fan_in"] = max_fan_in;
    s["final_mean_fan_in"] = trace.mean_fan_in.empty() ? 0.0 : trace.mean_fan_in.back();
    s["fan_in_monotone_after_prune"] = fan_in_monotone;
    s["final_dw_l1"] = trace.dw_l1.empty() ? 0.0 : trace.dw_l1.back();
    s["epsilon_w"] = sc.epsilon_w();

    rec.converged = trace.converged;
    rec.accepted = sc.polarity_bias > 0.0 ? (nc >= 0.9 && ao >= 0.85) : (aligned >= 0.9);
    return s;
}

// ----------------------------------------------------------------- fragments

struct EvokeStats {
    double same_mean = 0.0;
    double cross_mean = 0.0;
    json matrix;  // per-tag mean jaccard against each texture probe
};

EvokeStats evoke_library(const fragments::FragmentLibrary& lib,
                         const fragments::CorticalField& field,
                         const fragments::FragmentsConfig& engine, int image_size, double jitter,
                         uint64_t seed, int probes_per_texture, CsvWriter* csv) {
    EvokeStats st;
    fragments::ThresholdSchedule sched = fragments::ThresholdSchedule::from(engine);
    const fragments::FeatureBank& bank = fragments::FeatureBank::instance();

    // mean over probes of the per-fragment jaccard, accumulated per texture
    std::vector<std::vector<double>> sums(lib.fragments.size(), std::vector<double>(4, 0.0));
    RngStream rng(seed, kStreamProbe);
    for (int t = 0; t < 4; ++t) {
        for (int p = 0; p < probes_per_texture; ++p) {
            GrayImage probe =
                generate_texture_mosaic(static_cast<TextureKind>(t), image_size, jitter, rng);
            ActivityState enc = fragments::feature_encode(probe, bank);
            ActivityState act = fragments::exuberant_init(enc, engine.exuberance_q);
            fragments::SettleResult settled = fragments::settle_fragments(act, field, sched);
            for (size_t fi = 0; fi < lib.fragments.size(); ++fi) {
                sums[fi][static_cast<size_t>(t)] += fragments::reactivation_jaccard(
                    lib.fragments[fi], settled.state, lib.fragments[fi].first_row,
                    lib.fragments[fi].first_col);
            }
        }
    }

    double same_sum = 0.0, cross_sum = 0.0;
    int same_n = 0, cross_n = 0;
    if (csv) csv->row("fragment,tag,stripes_0,stripes_90,checker,dots");
    for (size_t fi = 0; fi < lib.fragments.size(); ++fi) {
        const auto& frag = lib.fragments[fi];
        std::string row = std::to_string(frag.id) + "," + std::to_string(frag.source_tag);
        for (int t = 0; t < 4; ++t) {
            double mean = sums[fi][static_cast<size_t>(t)] / probes_per_texture;
            row += "," + fmt(mean);
            if (t == frag.source_tag) {
                same_sum += mean;
                ++same_n;
            } else {
                cross_sum += mean;
                ++cross_n;
            }
        }
        if (csv) csv->row(row);
    }
    st.same_mean = same_n > 0 ? same_sum / same_n : 0.0;
    st.cross_mean = cross_n > 0 ? cross_sum / cross_n : 0.0;
    return st;
}

json run_fragments(const ExperimentConfig& cfg, const std::string& out, RunRecord& rec) {
    const FragmentsExpConfig& fc = cfg.fragments;
    fragments::CorticalField field;
    fragments::FragmentLibrary lib;
    std::vector<int> tags;
    std::vector<GrayImage> corpus;

    if (fc.mode == "evoke") {
        if (fc.field_in.empty() || fc.library_in.empty()) {
            throw InvalidArgument("fragments evoke: field_in and library_in are required");
        }
        field.lateral = read_snapshot(fc.field_in, /*lateral=*/true);
        field.sheet = field.lateral.post_sheet();
        field.radius_rho = fc.engine.radius_rho;
        field.budget = fc.engine.budget;
        lib = fragments::read_fragment_library(fc.library_in);
    } else {
        RngStream rng(cfg.seed, kStreamCorpus);
        corpus = texture_corpus(fc.images_per_texture, fc.image_size, fc.jitter, rng, &tags);
        field = fragments::lateral_learn(corpus, fc.engine);
        lib = fragments::extract_fragments(corpus, field, fc.engine, tags);
        write_snapshot(field.lateral, out + "/field.nfw");
        fragments::write_fragment_library(lib, out + "/library.nfl");
    }

    json s;
    s["kind"] = "fragments";
    s["mode"] = fc.mode;
    s["library_size"] = lib.fragments.size();
    json per_tex = json::array();
    int counts[4] = {0, 0, 0, 0};
    for (const auto& f : lib.fragments) {
        if (f.source_tag >= 0 && f.source_tag < 4) ++counts[f.source_tag];
    }
    for (int t = 0; t < 4; ++t) per_tex.push_back(counts[t]);
    s["fragments_per_texture"] = per_tex;

    if (fc.mode != "train") {
        CsvWriter csv;
        EvokeStats st = evoke_library(lib, field, fc.engine, fc.image_size, fc.jitter, cfg.seed,
                                      3, &csv);
        csv.save(out + "/jaccard.csv");
        rec.metrics_files.push_back(out + "/jaccard.csv");
        s["same_texture_jaccard"] = st.same_mean;
        s["cross_texture_jaccard"] = st.cross_mean;
        rec.accepted = counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && counts[3] > 0 &&
                       st.same_mean >= 0.8 && st.cross_mean <= 0.3;
    } else {
        rec.accepted = counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && counts[3] > 0;
    }
    return s;
}

// ------------------------------------------------------------------- segment

json run_segment(const ExperimentConfig& cfg, const std::string& out, RunRecord& rec) {
    const SegmentConfig& sc = cfg.segment;
    RngStream train_rng(cfg.seed, kStreamTrain);
    std::vector<GrayImage> corpus =
        texture_corpus(sc.train_images_per_texture, sc.scene_size, sc.train_jitter, train_rng,
                       nullptr);
    fragments::CorticalField field = fragments::lateral_learn(corpus, sc.engine);

    RngStream rng(cfg.seed, kStreamScenes);
    CsvWriter csv;
    csv.row("scene,object,background,row,col,iou,degenerate");
    double iou_sum = 0.0, iou_min = 1.0;
    int degenerate = 0;
    for (int i = 0; i < sc.scenes; ++i) {
        int pair = i % 12;
        int obj = pair / 3;
        int rem = pair % 3;
        int bg = rem >= obj ? rem + 1 : rem;  // the rem-th texture != obj
        int lim = sc.scene_size - sc.object_size - 2;
        int top_r = 2 + rng.uniform_int(lim - 1);
        int top_c = 2 + rng.uniform_int(lim - 1);
        ObjectScene scene = generate_object_scene(
            static_cast<TextureKind>(obj), static_cast<TextureKind>(bg), sc.object_size, top_r,
            top_c, sc.scene_size, sc.object_jitter, sc.background_jitter, rng);
        fragments::SegmentResult res = fragments::figure_ground(scene.image, field, sc.engine);
        if (res.degenerate) ++degenerate;

        double inter = 0.0, uni = 0.0;
        for (size_t p = 0; p < scene.mask.pixels.size(); ++p) {
            bool a = res.mask.pixels[p] != 0.0;
            bool b = scene.mask.pixels[p] != 0.0;
            if (a && b) ++inter;
            if (a || b) ++uni;
        }
        double iou = uni > 0.0 ? inter / uni : 0.0;
        iou_sum += iou;
        iou_min = std::min(iou_min, iou);
        char name[64];
        std::snprintf(name, sizeof(name), "/mask_%03d.pbm", i);
        write_pbm(out + name, res.mask);
        csv.row(std::to_string(i) + "," + texture_kind_name(static_cast<TextureKind>(obj)) + "," +
                texture_kind_name(static_cast<TextureKind>(bg)) + "," + std::to_string(top_r) +
                "," + std::to_string(top_c) + "," + fmt(iou) + "," +
                std::to_string(res.degenerate ? 1 : 0));
    }
    csv.save(out + "/iou.csv");
    rec.metrics_files.push_back(out + "/iou.csv");

    json s;
    s["kind"] = "segment";
    s["scenes"] = sc.scenes;
    s["iou_mean"] = sc.scenes > 0 ? iou_sum / sc.scenes : 0.0;
    s["iou_min"] = sc.scenes > 0 ? iou_min : 0.0;
    s["degenerate_scenes"] = degenerate;
    rec.accepted = sc.scenes > 0 && iou_sum / sc.scenes >= 0.8 && iou_min >= 0.6;
    return s;
}

// -------------------------------------------------------------------- select

json run_select(const ExperimentConfig& cfg, const std::string& out, RunRecord& rec) {
    const SelectConfig& sc = cfg.select;
    const fragments::FeatureBank& bank = fragments::FeatureBank::instance();

    // field trained on both stripe phases so that either pattern is a
    // self-supporting net
    RngStream train_rng(cfg.seed, kStreamSelectTrain);
    std::vector<GrayImage> corpus;
    for (int i = 0; i < sc.train_images; ++i) {
        corpus.push_back(generate_texture_mosaic(TextureKind::stripes_0, sc.size, sc.train_jitter,
                                                 train_rng, (i % 2) * 2, 0));
    }
    fragments::CorticalField field = fragments::lateral_learn(corpus, sc.engine);
    fragments::ThresholdSchedule sched = fragments::ThresholdSchedule::from(sc.engine);

    // reference pattern nets from clean renderings of the two phases
    std::vector<uint32_t> patterns[2];
    for (int ph = 0; ph < 2; ++ph) {
        RngStream dummy(cfg.seed, 99);
        GrayImage img =
            generate_texture_mosaic(TextureKind::stripes_0, sc.size, 0.0, dummy, ph * 2, 0);
        ActivityState enc = fragments::feature_encode(img, bank);
        ActivityState act = fragments::exuberant_init(enc, sc.engine.exuberance_q);
        fragments::SettleResult settled = fragments::settle_fragments(act, field, sched);
        patterns[ph] = settled.state.active_units();
    }

    CsvWriter csv;
    csv.row("trial,delta,winner,purity,winner_overlap,loser_overlap,theta0,theta1,no_winner");
    bool all_single = true;
    double min_purity = 1.0, max_loser = 0.0;
    int ties = 0;
    for (int trial = 0; trial < sc.trials; ++trial) {
        RngStream rng(cfg.seed, kStreamSelectTrial + static_cast<uint64_t>(trial));
        ActivityState input = ActivityState::zeros(field.sheet);
        for (int ph = 0; ph < 2; ++ph) {
            GrayImage img = generate_texture_mosaic(TextureKind::stripes_0, sc.size, sc.jitter,
                                                    rng, ph * 2, 0);
            ActivityState enc = fragments::feature_encode(img, bank);
            ActivityState act = fragments::exuberant_init(enc, sc.engine.exuberance_q);
            double gain = ph == 0 ? 1.0 + sc.delta : 1.0 - sc.delta;
            for (uint32_t u = 0; u < act.values.size(); ++u) {
                input.values[u] = std::max(input.values[u], gain * act.values[u]);
            }
        }
        fragments::NetSelectionResult res =
            fragments::net_selection(input, field, patterns[0], patterns[1], sched);
        if (res.no_winner || res.winner < 0) all_single = false;
        if (!res.no_winner) {
            min_purity = std::min(min_purity, res.purity);
            max_loser = std::max(max_loser, res.loser_overlap);
        }
        if (res.tie_broken) ++ties;
        csv.row(std::to_string(trial) + "," + fmt(sc.delta) + "," + std::to_string(res.winner) +
                "," + fmt(res.purity) + "," + fmt(res.winner_overlap) + "," +
                fmt(res.loser_overlap) + "," + fmt(res.collapse_theta[0]) + "," +
                fmt(res.collapse_theta[1]) + "," + std::to_string(res.no_winner ? 1 : 0));
    }
    csv.save(out + "/selection.csv");
    rec.metrics_files.push_back(out + "/selection.csv");

    json s;
    s["kind"] = "select";
    s["trials"] = sc.trials;
    s["delta"] = sc.delta;
    s["all_single_winner"] = all_single;
    s["min_purity"] = min_purity;
    s["max_loser_overlap"] = max_loser;
    s["ties_broken"] = ties;
    s["pattern_sizes"] = json::array({patterns[0].size(), patterns[1].size()});
    rec.accepted = sc.delta > 0.0
                       ? (all_single && min_purity >= 0.9 && max_loser <= 0.1)
                       : all_single;
    return s;
}

// --------------------------------------------------------------------- match

struct MatchSetup {
    maplets::ModelStore store;
    std::vector<GrayImage> patches;  // canonical crop in pixel space, per model
};

MatchSetup build_match_store(const MatchConfig& mc, uint64_t seed) {
    MatchSetup setup;
    const fragments::FeatureBank& bank = fragments::FeatureBank::instance();
    RngStream rng(seed, kStreamMatchStore);
    for (int sid = 0; sid < kSpriteCount; ++sid) {
        SceneParams p;
        p.sprite_id = sid;
        p.foreground = texture_kind_from(mc.fg_texture);
        p.background = texture_kind_from(mc.bg_texture);
        p.translate_r = mc.anchor_r;
        p.translate_c = mc.anchor_c;
        p.scale = 1.0;
        p.size = mc.image_size;
        p.fg_jitter = mc.fg_jitter;
        p.bg_jitter = mc.bg_jitter;
        SpriteScene scene = generate_sprite_scene(p, rng);
        ActivityState enc = fragments::feature_encode(scene.image, bank);
        std::vector<uint8_t> node_mask(static_cast<size_t>(enc.sheet.node_count()), 0);
        for (int r = 0; r < enc.sheet.rows; ++r) {
            for (int c = 0; c < enc.sheet.cols; ++c) {
                node_mask[enc.sheet.node_of(r, c)] = scene.mask.at(r + 1, c + 1) != 0.0;
            }
        }
        setup.store.store_model(enc, node_mask, sprite_name(sid));

        const maplets::StoredModel& m = setup.store.model(setup.store.size() - 1);
        GrayImage patch{m.sheet.rows, m.sheet.cols,
                        std::vector<double>(static_cast<size_t>(m.sheet.node_count()))};
        for (int r = 0; r < m.sheet.rows; ++r) {
            for (int c = 0; c < m.sheet.cols; ++c) {
                patch.at(r, c) = scene.image.at(r + m.origin_row + 1, c + m.origin_col + 1);
            }
        }
        setup.patches.push_back(std::move(patch));
    }
    return setup;
}

json run_match(const ExperimentConfig& cfg, const std::string& out, RunRecord& rec) {
    const MatchConfig& mc = cfg.match;
    const fragments::FeatureBank& bank = fragments::FeatureBank::instance();

    maplets::RelaxParams params;
    params.scales = mc.scales;
    params.iterations = mc.iterations;
    params.eta = mc.eta;
    params.beta = mc.beta;
    params.epsilon0 = mc.epsilon0;
    params.tolerance = mc.tolerance;

    MatchSetup setup = build_match_store(mc, cfg.seed);
    setup.store.save(out + "/store.nfm");

    json s;
    s["kind"] = "match";
    s["models"] = setup.store.size();
    if (mc.mode == "store") {
        rec.accepted = true;
        return s;
    }

    RngStream qrng(cfg.seed, kStreamMatchQuery);
    CsvWriter csv;
    csv.row(
        "query,true_id,scale,trans_r,trans_c,rank1,quality,disp_r,disp_c,sigma,correct,"
        "trans_err,scale_err,oracle_id,oracle_agree");
    int correct = 0, trans_ok = 0, scale_ok = 0;
    int oracle_total = 0, oracle_agree = 0;
    double worst_trans = 0.0, worst_scale = 0.0;
    for (int qi = 0; qi < mc.queries; ++qi) {
        int true_id = qi % kSpriteCount;
        double sigma = mc.scales[static_cast<size_t>(qi) % mc.scales.size()];
        int scaled = static_cast<int>(std::lround(kSpriteSize * sigma));
        int dr = qrng.uniform_int(2 * mc.max_shift + 1) - mc.max_shift;
        int dc = qrng.uniform_int(2 * mc.max_shift + 1) - mc.max_shift;
        int tr = std::clamp(mc.anchor_r + dr, 0, mc.image_size - scaled);
        int tc = std::clamp(mc.anchor_c + dc, 0, mc.image_size - scaled);

        SceneParams p;
        p.sprite_id = true_id;
        p.foreground = texture_kind_from(mc.fg_texture);
        p.background = texture_kind_from(mc.bg_texture);
        p.translate_r = tr;
        p.translate_c = tc;
        p.scale = sigma;
        p.size = mc.image_size;
        p.fg_jitter = mc.fg_jitter;
        p.bg_jitter = mc.bg_jitter;
        SpriteScene scene = generate_sprite_scene(p, qrng);
        ActivityState enc = fragments::feature_encode(scene.image, bank);
        auto results = maplets::recognize(enc, setup.store, params, mc.k);
        const maplets::MatchResult& top = results[0];
        bool ok = top.id == static_cast<uint32_t>(true_id);
        if (ok) ++correct;

        // estimated object placement from the fitted transform:
        // t = delta + sigma_fit * (anchor - 1) + 1
        double est_tr = top.map.transform.dr + top.map.transform.sigma * (mc.anchor_r - 1) + 1.0;
        double est_tc = top.map.transform.dc + top.map.transform.sigma * (mc.anchor_c - 1) + 1.0;
        double terr = std::hypot(est_tr - tr, est_tc - tc);
        double serr = std::abs(top.map.transform.sigma - sigma);
        if (ok) {
            if (terr <= 1.0) ++trans_ok;
            if (serr <= 0.1) ++scale_ok;
            worst_trans = std::max(worst_trans, terr);
            worst_scale = std::max(worst_scale, serr);
        }

        int oracle_id = -1;
        bool agree = false;
        if (sigma == 1.0) {
            ++oracle_total;
            CrossCorrelationResult best{};
            double best_score = -2.0;
            for (size_t m = 0; m < setup.patches.size(); ++m) {
                CrossCorrelationResult r =
                    oracle_cross_correlation(setup.patches[m], scene.image);
                if (r.score > best_score) {
                    best_score = r.score;
                    best = r;
                    oracle_id = static_cast<int>(m);
                }
            }
            const maplets::StoredModel& om = setup.store.model(static_cast<size_t>(oracle_id));
            // oracle placement of the patch -> object top-left in pixels
            int o_tr = best.row - (om.origin_row + 1) + mc.anchor_r;
            int o_tc = best.col - (om.origin_col + 1) + mc.anchor_c;
            agree = oracle_id == static_cast<int>(top.id) &&
                    std::lround(est_tr) == o_tr && std::lround(est_tc) == o_tc;
            if (agree) ++oracle_agree;
        }

        if (qi < 3) {
            char name[64];
            std::snprintf(name, sizeof(name), "/map_%03d.csv", qi);
            maplets::write_map_csv(top.map, out + name);
        }
        csv.row(std::to_string(qi) + "," + std::to_string(true_id) + "," + fmt(sigma) + "," +
                std::to_string(tr) + "," + std::to_string(tc) + "," + std::to_string(top.id) +
                "," + fmt(top.quality) + "," + fmt(est_tr - tr) + "," + fmt(est_tc - tc) + "," +
                fmt(top.map.transform.sigma) + "," + std::to_string(ok ? 1 : 0) + "," +
                fmt(terr) + "," + fmt(serr) + "," + std::to_string(oracle_id) + "," +
                std::to_string(agree ? 1 : 0));
    }
    csv.save(out + "/matches.csv");
    rec.metrics_files.push_back(out + "/matches.csv");

    // noise rejection
    RngStream nrng(cfg.seed, kStreamMatchNoise);
    CsvWriter ncsv;
    ncsv.row("trial,max_quality,rejected");
    int rejected = 0;
    for (int ni = 0; ni < mc.noise_trials; ++ni) {
        GrayImage noise{mc.image_size, mc.image_size,
                        std::vector<double>(static_cast<size_t>(mc.image_size * mc.image_size))};
        for (double& v : noise.pixels) v = nrng.uniform();
        ActivityState enc = fragments::feature_encode(noise, bank);
        auto results = maplets::recognize(enc, setup.store, params, mc.k);
        double max_q = results[0].quality;
        bool rej = max_q < mc.tau_rej;
        if (rej) ++rejected;
        ncsv.row(std::to_string(ni) + "," + fmt(max_q) + "," + std::to_string(rej ? 1 : 0));
    }
    ncsv.save(out + "/noise.csv");
    rec.metrics_files.push_back(out + "/noise.csv");

    double rank1 = mc.queries > 0 ? static_cast<double>(correct) / mc.queries : 0.0;
    double oracle_rate = oracle_total > 0 ? static_cast<double>(oracle_agree) / oracle_total : 1.0;
    double reject_rate = mc.noise_trials > 0 ? static_cast<double>(rejected) / mc.noise_trials : 1.0;

    s["queries"] = mc.queries;
    s["rank1_accuracy"] = rank1;
    s["correct"] = correct;
    s["translation_ok"] = trans_ok;
    s["scale_ok"] = scale_ok;
    s["worst_translation_error"] = worst_trans;
    s["worst_scale_error"] = worst_scale;
    s["oracle_queries"] = oracle_total;
    s["oracle_agreement"] = oracle_rate;
    s["noise_trials"] = mc.noise_trials;
    s["noise_reject_rate"] = reject_rate;
    s["tau_rej"] = mc.tau_rej;
    rec.accepted = rank1 >= 0.9 && trans_ok == correct && scale_ok == correct &&
                   oracle_rate >= 0.9 && reject_rate >= 0.95;
    return s;
}

}  // namespace

std::string resolve_out_dir(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    std::string base;
    if (const char* env = std::getenv("NETFRAG_OUT")) base = env;
    if (base.empty()) base = "runs";
    return base + "/" + experiment_kind_name(cfg.kind) + "-seed" + std::to_string(cfg.seed);
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
    RunRecord rec;
    rec.config_hash = cfg.config_hash();
    rec.code_version = kCodeVersion;
    rec.started_at = iso_now();
    auto t0 = std::chrono::steady_clock::now();

    std::string out = resolve_out_dir(cfg);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
        throw InvalidArgument("run_experiment: cannot create output directory: " + out);
    }
    rec.out_dir = out;
    write_text(out + "/config_resolved.cfg", cfg.resolved_text());

    json summary;
    switch (cfg.kind) {
        case ExperimentKind::retinotopy: summary = run_retinotopy(cfg, out, rec); break;
        case ExperimentKind::fragments: summary = run_fragments(cfg, out, rec); break;
        case ExperimentKind::segment: summary = run_segment(cfg, out, rec); break;
        case ExperimentKind::select: summary = run_select(cfg, out, rec); break;
        case ExperimentKind::match: summary = run_match(cfg, out, rec); break;
    }
    summary["seed"] = cfg.seed;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(rec.config_hash));
    summary["config_hash"] = hash_hex;
    summary["accepted"] = rec.accepted;
    write_text(out + "/summary.json", summary.dump(2) + "\n");

    auto t1 = std::chrono::steady_clock::now();
    rec.finished_at = iso_now();
    rec.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    json rr;
    rr["config_hash"] = hash_hex;
    rr["code_version"] = rec.code_version;
    rr["started_at"] = rec.started_at;
    rr["finished_at"] = rec.finished_at;
    rr["wall_seconds"] = rec.wall_seconds;
    rr["out_dir"] = rec.out_dir;
    rr["metrics_files"] = rec.metrics_files;
    rr["converged"] = rec.converged;
    rr["accepted"] = rec.accepted;
    write_text(out + "/run_record.json", rr.dump(2) + "\n");
    return rec;
}

namespace {

bool glob_match(const std::string& pattern, const std::string& name) {
    // supports '*' and '?'
    size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace

std::vector<RunRecord> run_sweep(const std::string& glob_pattern, int parallel) {
    fs::path pattern(glob_pattern);
    fs::path dir = pattern.parent_path();
    if (dir.empty()) dir = ".";
    std::string file_pat = pattern.filename().string();

    std::vector<std::string> configs;
    if (fs::is_directory(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            if (glob_match(file_pat, entry.path().filename().string())) {
                configs.push_back(entry.path().string());
            }
        }
    }
    std::sort(configs.begin(), configs.end());
    if (configs.empty()) throw InvalidArgument("sweep: no configs match " + glob_pattern);

    std::vector<RunRecord> records(configs.size());
    std::mutex m;
    size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            size_t i;
            {
                std::lock_guard<std::mutex> lock(m);
                if (next >= configs.size()) return;
                i = next++;
            }
            ExperimentConfig cfg = ExperimentConfig::from_file(configs[i]);
            records[i] = run_experiment(cfg);
        }
    };
    int n_threads = std::max(1, std::min<int>(parallel, static_cast<int>(configs.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return records;
}

}  // namespace netfrag::harness
