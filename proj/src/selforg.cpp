#include "netfrag/selforg.hpp"

#include <algorithm>
#include <cmath>

#include "netfrag/kernels.hpp"

namespace netfrag::selforg {

double LateralKernel::eval(double d) const {
    double e = excite_amp * std::exp(-d * d / (2.0 * excite_radius * excite_radius));
    double i = inhibit_amp * std::exp(-d * d / (2.0 * inhibit_radius * inhibit_radius));
    return e - i;
}

double SelfOrgConfig::inhibit_amp_at(int epoch) const {
    if (inhibit_ramp_epochs <= 0) return inhibit_end;
    double t = std::min(1.0, static_cast<double>(epoch) / inhibit_ramp_epochs);
    return inhibit_start + (inhibit_end - inhibit_start) * t;
}

ActivityState blob_at(const Sheet& retina, int center_r, int center_c, double blob_radius) {
    ActivityState a = ActivityState::zeros(retina);
    const double cut = 3.0 * blob_radius;
    const double cut2 = cut * cut;
    for (int r = 0; r < retina.rows; ++r) {
        for (int c = 0; c < retina.cols; ++c) {
            double dr = r - center_r;
            double dc = c - center_c;
            double d2 = dr * dr + dc * dc;
            if (d2 > cut2) continue;
            a.at(retina.node_of(r, c), 0) =
                std::exp(-d2 / (2.0 * blob_radius * blob_radius));
        }
    }
    return a;
}

ActivityState spontaneous_event(const Sheet& retina, double blob_radius, RngStream& rng) {
    if (blob_radius < 1.0) throw InvalidArgument("spontaneous_event: blob_radius must be >= 1");
    int cr = rng.uniform_int(retina.rows);
    int cc = rng.uniform_int(retina.cols);
    return blob_at(retina, cr, cc, blob_radius);
}

namespace {

std::vector<kernels::KernelOffset> kernel_offsets(const LateralKernel& k) {
    if (!(k.inhibit_radius > k.excite_radius) || k.excite_radius <= 0.0) {
        throw InvalidArgument("LateralKernel: requires r_i > r_e > 0");
    }
    const double cut = 3.0 * k.inhibit_radius;
    const int n = static_cast<int>(std::floor(cut));
    std::vector<kernels::KernelOffset> offs;
    for (int dr = -n; dr <= n; ++dr) {
        for (int dc = -n; dc <= n; ++dc) {
            if (dr == 0 && dc == 0) continue;  // lateral term excludes self
            double d = std::sqrt(static_cast<double>(dr * dr + dc * dc));
            if (d > cut) continue;
            offs.push_back({dr, dc, k.eval(d)});
        }
    }
    return offs;
}

}  // namespace

ActivityState settle(const Sheet& post_sheet, const std::vector<double>& drive,
                     const LateralKernel& kernel, int steps, double mass) {
    if (steps < 1) throw InvalidArgument("settle: steps must be >= 1");
    for (double d : drive) {
        if (!std::isfinite(d)) throw InvalidArgument("settle: non-finite drive");
    }
    const int n = post_sheet.node_count();
    auto offs = kernel_offsets(kernel);
    std::vector<double> a(static_cast<size_t>(n), 0.0);
    std::vector<double> lat;
    for (int t = 0; t < steps; ++t) {
        kernels::convolve(post_sheet.rows, post_sheet.cols, a, offs, lat);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = drive[static_cast<size_t>(i)] + lat[static_cast<size_t>(i)];
            v = v > 0.0 ? v : 0.0;
            a[static_cast<size_t>(i)] = v;
            total += v;
        }
        if (total > mass && total > 0.0) {
            double f = mass / total;
            for (int i = 0; i < n; ++i) a[static_cast<size_t>(i)] *= f;
        }
    }
    ActivityState out = ActivityState::zeros(Sheet{post_sheet.rows, post_sheet.cols, 1});
    out.values = std::move(a);
    return out;
}

void hebbian_step(WeightField& w, const ActivityState& a_pre, const ActivityState& a_post,
                  double alpha) {
    if (alpha <= 0.0) throw InvalidArgument("hebbian_step: alpha must be > 0");
    auto pre_active = a_pre.active_units();
    if (pre_active.empty()) return;
    std::vector<WeightEntry> incs;
    incs.reserve(pre_active.size());
    for (uint32_t i = 0; i < static_cast<uint32_t>(a_post.values.size()); ++i) {
        double ai = a_post.values[i];
        if (ai <= 0.0) continue;
        incs.clear();
        for (uint32_t j : pre_active) {
            incs.push_back({j, alpha * ai * a_pre.values[j]});
        }
        // merge the sorted increment list into the sorted row
        auto& row = w.incoming_mut(i);
        std::vector<WeightEntry> merged;
        merged.reserve(row.size() + incs.size());
        size_t p = 0, q = 0;
        while (p < row.size() || q < incs.size()) {
            if (q >= incs.size() || (p < row.size() && row[p].pre < incs[q].pre)) {
                merged.push_back(row[p++]);
            } else if (p >= row.size() || incs[q].pre < row[p].pre) {
                merged.push_back(incs[q++]);
            } else {
                merged.push_back({row[p].pre, row[p].w + incs[q].w});
                ++p;
                ++q;
            }
        }
        row = std::move(merged);
    }
}

void normalize_incoming(WeightField& w, double s, bool strict) {
    if (s <= 0.0) throw InvalidArgument("normalize_incoming: s must be > 0");
    for (uint32_t i = 0; i < w.post_units(); ++i) {
        double sum = w.incoming_sum(i);
        if (sum <= 0.0) {
            if (strict) {
                throw DegenerateUnit(
                    "normalize_incoming: post unit " + std::to_string(i) + " has zero incoming sum",
                    i);
            }
            continue;
        }
        w.scale_row(i, s / sum);
    }
}

void prune(WeightField& w, int fan_in_cap, double w_min, double s) {
    if (fan_in_cap < 1) throw InvalidArgument("prune: fan_in_cap must be >= 1");
    for (uint32_t i = 0; i < w.post_units(); ++i) {
        auto& row = w.incoming_mut(i);
        row.erase(std::remove_if(row.begin(), row.end(),
                                 [&](const WeightEntry& e) { return e.w < w_min; }),
                  row.end());
        if (static_cast<int>(row.size()) > fan_in_cap) {
            std::sort(row.begin(), row.end(), [](const WeightEntry& a, const WeightEntry& b) {
                if (a.w != b.w) return a.w > b.w;
                return a.pre < b.pre;
            });
            row.resize(static_cast<size_t>(fan_in_cap));
            std::sort(row.begin(), row.end(),
                      [](const WeightEntry& a, const WeightEntry& b) { return a.pre < b.pre; });
        }
        double sum = 0.0;
        for (const auto& e : row) sum += e.w;
        if (sum > 0.0) {
            double f = s / sum;
            for (auto& e : row) e.w *= f;
        }
    }
}

std::pair<WeightField, RunTrace> run_selforg(const SelfOrgConfig& cfg) {
    RngStream init_rng(cfg.seed, 1);
    InitParams ip;
    ip.mode = cfg.polarity_bias != 0.0 ? InitMode::polarity_biased : InitMode::uniform_noise;
    ip.noise_amplitude = cfg.init_noise;
    ip.budget = cfg.budget;
    ip.polarity_bias = cfg.polarity_bias;
    Sheet retina = new_sheet(cfg.retina_rows, cfg.retina_cols, 1);
    Sheet tectum = new_sheet(cfg.tectum_rows, cfg.tectum_cols, 1);
    WeightField w0 = init_weight_field(retina, tectum, ip, init_rng);
    return run_selforg(cfg, w0, SnapshotHook());
}

std::pair<WeightField, RunTrace> run_selforg(const SelfOrgConfig& cfg, const WeightField& start,
                                             const SnapshotHook& hook) {
    if (cfg.alpha <= 0.0) throw InvalidArgument("run_selforg: alpha must be > 0");
    if (cfg.budget <= 0.0) throw InvalidArgument("run_selforg: budget must be > 0");
    if (cfg.epsilon_w_scale <= 0.0) throw InvalidArgument("run_selforg: epsilon_w_scale must be > 0");
    if (cfg.inhibit_end < cfg.inhibit_start) {
        throw InvalidArgument("run_selforg: inhibition schedule must be nondecreasing");
    }

    Sheet retina = start.pre_sheet();
    Sheet tectum = start.post_sheet();
    WeightField w = start;
    RngStream rng(cfg.seed, 2);
    RunTrace trace;

    const double eps_w = cfg.epsilon_w();
    int consecutive = 0;

    LateralKernel kernel;
    kernel.excite_amp = cfg.excite_amp;
    kernel.excite_radius = cfg.excite_radius;
    kernel.inhibit_radius = cfg.inhibit_radius;

    std::vector<double> drv;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        kernel.inhibit_amp = cfg.inhibit_amp_at(epoch);
        WeightField before = w;
        for (int ev = 0; ev < cfg.events_per_epoch; ++ev) {
            ActivityState stim = spontaneous_event(retina, cfg.blob_radius, rng);
            kernels::drive(w, stim.values, drv);
            ActivityState resp = settle(tectum, drv, kernel, cfg.settle_steps, cfg.settle_mass);
            hebbian_step(w, stim, resp, cfg.alpha);
            normalize_incoming(w, cfg.budget);
            for (uint32_t i = 0; i < w.post_units(); ++i) {
                double err = std::abs(w.incoming_sum(i) - cfg.budget);
                if (err > trace.max_budget_error) trace.max_budget_error = err;
            }
        }
        int cap = epoch + 1 >= cfg.prune_start_epoch ? cfg.fan_in_cap
                                                     : start.pre_sheet().unit_count();
        prune(w, cap, cfg.weight_min, cfg.budget);
        if (!w.all_finite()) {
            throw NumericalFailure("run_selforg: non-finite weights at epoch " +
                                       std::to_string(epoch),
                                   epoch);
        }

        double dw = WeightField::l1_distance(w, before);
        trace.dw_l1.push_back(dw);
        trace.neighbor_consistency.push_back(neighbor_consistency(w));
        trace.affine_order.push_back(affine_order(w));
        trace.mean_fan_in.push_back(static_cast<double>(w.nonzero_count()) /
                                    static_cast<double>(w.post_units()));
        if (hook) hook(epoch, w);

        consecutive = dw < eps_w ? consecutive + 1 : 0;
        if (consecutive == 3 && trace.converged_epoch < 0) trace.converged_epoch = epoch;
        if (consecutive >= 3 && epoch + 1 >= cfg.prune_start_epoch) break;
    }
    trace.converged = consecutive >= 3;
    return {std::move(w), std::move(trace)};
}

std::pair<double, double> receptive_center(const WeightField& w, uint32_t post_unit) {
    const Sheet& pre = w.pre_sheet();
    double sum = 0.0, sr = 0.0, sc = 0.0;
    for (const auto& e : w.incoming(post_unit)) {
        uint32_t node = pre.unit_node(e.pre);
        sum += e.w;
        sr += e.w * pre.node_row(node);
        sc += e.w * pre.node_col(node);
    }
    if (sum <= 0.0) {
        throw DegenerateUnit("receptive_center: zero incoming sum at unit " +
                                 std::to_string(post_unit),
                             post_unit);
    }
    return {sr / sum, sc / sum};
}

namespace {

double linear_extent(const Sheet& s) {
    return static_cast<double>(std::max(std::max(s.rows, s.cols) - 1, 1));
}

std::vector<std::pair<double, double>> all_centers(const WeightField& w) {
    std::vector<std::pair<double, double>> centers(w.post_units());
    for (uint32_t i = 0; i < w.post_units(); ++i) centers[i] = receptive_center(w, i);
    return centers;
}

}  // namespace

double neighbor_consistency(const WeightField& w) {
    const Sheet& post = w.post_sheet();
    const Sheet& pre = w.pre_sheet();
    auto centers = all_centers(w);
    const double tol = 1.5 * linear_extent(pre) / linear_extent(post);
    int pairs = 0, close = 0;
    for (int r = 0; r < post.rows; ++r) {
        for (int c = 0; c < post.cols; ++c) {
            uint32_t a = post.node_of(r, c);
            for (int k = 0; k < 2; ++k) {
                int rr = r + (k == 0 ? 1 : 0);
                int cc = c + (k == 0 ? 0 : 1);
                if (rr >= post.rows || cc >= post.cols) continue;
                uint32_t b = post.node_of(rr, cc);
                double dr = centers[a].first - centers[b].first;
                double dc = centers[a].second - centers[b].second;
                ++pairs;
                if (std::sqrt(dr * dr + dc * dc) <= tol) ++close;
            }
        }
    }
    return pairs > 0 ? static_cast<double>(close) / pairs : 1.0;
}

double affine_order(const WeightField& w) {
    const Sheet& post = w.post_sheet();
    const Sheet& pre = w.pre_sheet();
    auto centers = all_centers(w);
    const int n = post.node_count();

    // normal equations for [r c 1] -> center, shared Gram matrix
    double g[3][3] = {{0}};
    double brhs[3][2] = {{0}};
    for (int i = 0; i < n; ++i) {
        double p[3] = {static_cast<double>(post.node_row(static_cast<uint32_t>(i))),
                       static_cast<double>(post.node_col(static_cast<uint32_t>(i))), 1.0};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) g[a][b] += p[a] * p[b];
            brhs[a][0] += p[a] * centers[static_cast<size_t>(i)].first;
            brhs[a][1] += p[a] * centers[static_cast<size_t>(i)].second;
        }
    }
    double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                 g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                 g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if (std::abs(det) < 1e-9) throw DegenerateGeometry("affine_order: singular normal equations");

    double inv[3][3];
    inv[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
    inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
    inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
    inv[1][0] = (g[1][2] * g[2][0] - g[1][0] * g[2][2]) / det;
    inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
    inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
    inv[2][0] = (g[1][0] * g[2][1] - g[1][1] * g[2][0]) / det;
    inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
    inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;

    double coef[3][2];
    for (int a = 0; a < 3; ++a) {
        for (int out = 0; out < 2; ++out) {
            coef[a][out] = inv[a][0] * brhs[0][out] + inv[a][1] * brhs[1][out] +
                           inv[a][2] * brhs[2][out];
        }
    }

    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        double pr = post.node_row(static_cast<uint32_t>(i));
        double pc = post.node_col(static_cast<uint32_t>(i));
        double fr = coef[0][0] * pr + coef[1][0] * pc + coef[2][0];
        double fc = coef[0][1] * pr + coef[1][1] * pc + coef[2][1];
        double dr = fr - centers[static_cast<size_t>(i)].first;
        double dc = fc - centers[static_cast<size_t>(i)].second;
        rss += dr * dr + dc * dc;
    }
    double rms = std::sqrt(rss / n);
    double r_half = 0.5 * linear_extent(pre);

    double lin_det = std::abs(coef[0][0] * coef[1][1] - coef[1][0] * coef[0][1]);
    double det_expected =
        (static_cast<double>(std::max(pre.rows - 1, 1)) * std::max(pre.cols - 1, 1)) /
        (static_cast<double>(std::max(post.rows - 1, 1)) * std::max(post.cols - 1, 1));

    double fit = std::max(0.0, 1.0 - rms / r_half);
    double area = std::min(1.0, lin_det / det_expected);
    return fit * area;
}

double symmetry_aligned_order(const WeightField& w) {
    const Sheet& post = w.post_sheet();
    const Sheet& pre = w.pre_sheet();
    auto centers = all_centers(w);
    const double r_half = 0.5 * linear_extent(pre);
    const int n = post.node_count();

    double best = 0.0;
    for (int sym = 0; sym < 8; ++sym) {
        double rss = 0.0;
        for (int i = 0; i < n; ++i) {
            int r = post.node_row(static_cast<uint32_t>(i));
            int c = post.node_col(static_cast<uint32_t>(i));
            // apply one of the 8 square symmetries in post coordinates
            int rr = r, cc = c;
            if (sym & 1) rr = post.rows - 1 - rr;
            if (sym & 2) cc = post.cols - 1 - cc;
            if (sym & 4) std::swap(rr, cc);
            double er, ec;
            affine_pre_coord(pre, post, rr, cc, &er, &ec);
            double dr = centers[static_cast<size_t>(i)].first - er;
            double dc = centers[static_cast<size_t>(i)].second - ec;
            rss += dr * dr + dc * dc;
        }
        double score = std::max(0.0, 1.0 - std::sqrt(rss / n) / r_half);
        if (score > best) best = score;
    }
    return best;
}

double path_redundancy(const WeightField& lateral_field, const std::vector<uint32_t>& active_set) {
    if (active_set.empty()) throw InvalidArgument("path_redundancy: empty active set");
    std::vector<char> active(lateral_field.post_units(), 0);
    for (uint32_t u : active_set) active[u] = 1;

    // undirected adjacency over active units
    auto connected = [&](uint32_t a, uint32_t b) {
        return lateral_field.get(a, b) > 0.0 || lateral_field.get(b, a) > 0.0;
    };
    auto neighbors = [&](uint32_t u) {
        std::vector<uint32_t> out;
        for (const auto& e : lateral_field.incoming(u)) {
            if (active[e.pre] && e.w > 0.0) out.push_back(e.pre);
        }
        for (uint32_t v : active_set) {
            if (v == u || !active[v]) continue;
            if (lateral_field.get(v, u) > 0.0) out.push_back(v);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };

    double total = 0.0;
    int pairs = 0;
    for (size_t ia = 0; ia < active_set.size(); ++ia) {
        for (size_t ib = ia + 1; ib < active_set.size(); ++ib) {
            uint32_t a = active_set[ia], b = active_set[ib];
            if (!connected(a, b)) continue;
            auto na = neighbors(a);
            auto nb = neighbors(b);
            int common = 0;
            size_t p = 0, q = 0;
            while (p < na.size() && q < nb.size()) {
                if (na[p] == b) { ++p; continue; }
                if (nb[q] == a) { ++q; continue; }
                if (na[p] < nb[q]) ++p;
                else if (nb[q] < na[p]) ++q;
                else { ++common; ++p; ++q; }
            }
            total += common;
            ++pairs;
        }
    }
    return pairs > 0 ? total / pairs : 0.0;
}

}  // namespace netfrag::selforg
