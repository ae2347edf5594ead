#include "netfrag/fragments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "netfrag/kernels.hpp"
#include "netfrag/selforg.hpp"

namespace netfrag::fragments {

namespace {

std::array<double, 9> normalized(std::array<double, 9> f) {
    double n2 = 0.0;
    for (double v : f) n2 += v * v;
    double inv = 1.0 / std::sqrt(n2);
    for (double& v : f) v *= inv;
    return f;
}

std::array<double, 9> negated(std::array<double, 9> f) {
    for (double& v : f) v = -v;
    return f;
}

}  // namespace

const FeatureBank& FeatureBank::instance() {
    static const FeatureBank bank = [] {
        FeatureBank b;
        // index = (dr+1) * 3 + (dc+1)
        std::array<double, 9> bright{1, 1, 1, 1, 1, 1, 1, 1, 1};
        std::array<double, 9> e0{-1, -1, -1, 0, 0, 0, 1, 1, 1};       // bright below
        std::array<double, 9> e45{0, 1, 1, -1, 0, 1, -1, -1, 0};      // sign(c - r)
        std::array<double, 9> e90{-1, 0, 1, -1, 0, 1, -1, 0, 1};      // bright right
        std::array<double, 9> e135{-1, -1, 0, -1, 0, 1, 0, 1, 1};     // sign(r + c - 2)
        b.filters.push_back(normalized(bright));
        b.filters.push_back(negated(normalized(bright)));
        for (const auto& e : {e0, e45, e90, e135}) {
            b.filters.push_back(normalized(e));
            b.filters.push_back(negated(normalized(e)));
        }
        return b;
    }();
    return bank;
}

ActivityState feature_encode(const GrayImage& image, const FeatureBank& bank) {
    if (image.rows < 8 || image.cols < 8) {
        throw InvalidArgument("feature_encode: image sides must be >= 8");
    }
    for (double p : image.pixels) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw InvalidArgument("feature_encode: pixel values must lie in [0, 1]");
        }
    }
    Sheet sheet = new_sheet(image.rows - 2, image.cols - 2, bank.size());
    ActivityState out = ActivityState::zeros(sheet);
    kernels::filter_bank_3x3(image.rows, image.cols, image.pixels, bank.filters, bank.center,
                             out.values);
    return out;
}

ActivityState exuberant_init(const ActivityState& features, double q) {
    if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("exuberant_init: q must be in (0, 1]");
    const Sheet& sheet = features.sheet;
    const int F = sheet.features;
    const int keep = static_cast<int>(std::ceil(q * F));
    ActivityState out = ActivityState::zeros(sheet);

    std::vector<int> order(static_cast<size_t>(F));
    for (int n = 0; n < sheet.node_count(); ++n) {
        const double* v = &features.values[static_cast<size_t>(n) * F];
        double vmax = 0.0;
        for (int f = 0; f < F; ++f) vmax = std::max(vmax, v[f]);
        if (vmax <= 0.0) continue;
        for (int f = 0; f < F; ++f) order[static_cast<size_t>(f)] = f;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (v[a] != v[b]) return v[a] > v[b];
            return a < b;
        });
        int taken = 0;
        for (int f = 0; f < F; ++f) {
            int id = order[static_cast<size_t>(f)];
            bool top = taken < keep && v[id] > 0.0;
            bool near_max = v[id] >= 0.8 * vmax;
            if (top || near_max) {
                out.values[static_cast<size_t>(n) * F + id] = v[id];
                if (top) ++taken;
            }
        }
    }
    return out;
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(double radius) {
    std::vector<std::pair<int, int>> offs;
    int n = static_cast<int>(std::floor(radius));
    for (int dr = -n; dr <= n; ++dr) {
        for (int dc = -n; dc <= n; ++dc) {
            if (dr * dr + dc * dc <= radius * radius) offs.emplace_back(dr, dc);
        }
    }
    return offs;
}

}  // namespace

CorticalField lateral_learn(const std::vector<GrayImage>& corpus, const FragmentsConfig& cfg) {
    if (corpus.empty()) throw InvalidArgument("lateral_learn: empty corpus");
    const FeatureBank& bank = FeatureBank::instance();
    Sheet sheet = new_sheet(corpus[0].rows - 2, corpus[0].cols - 2, bank.size());

    CorticalField field;
    field.sheet = sheet;
    field.lateral = WeightField(sheet, sheet, true);
    field.radius_rho = cfg.radius_rho;
    field.budget = cfg.budget;

    auto offs = disc_offsets(cfg.radius_rho);

    int since_prune = 0;
    for (const GrayImage& img : corpus) {
        if (img.rows - 2 != sheet.rows || img.cols - 2 != sheet.cols) {
            throw InvalidArgument("lateral_learn: corpus images must share one size");
        }
        ActivityState enc = feature_encode(img, bank);
        ActivityState act = exuberant_init(enc, cfg.exuberance_q);

        // active units grouped by node
        std::vector<std::vector<uint32_t>> by_node(static_cast<size_t>(sheet.node_count()));
        for (uint32_t u = 0; u < act.values.size(); ++u) {
            if (act.values[u] > 0.0) by_node[sheet.unit_node(u)].push_back(u);
        }

        for (int n = 0; n < sheet.node_count(); ++n) {
            int r = sheet.node_row(static_cast<uint32_t>(n));
            int c = sheet.node_col(static_cast<uint32_t>(n));
            for (uint32_t u : by_node[static_cast<size_t>(n)]) {
                double au = act.values[u];
                for (auto [dr, dc] : offs) {
                    int rr = r + dr;
                    int cc = c + dc;
                    if (rr < 0 || rr >= sheet.rows || cc < 0 || cc >= sheet.cols) continue;
                    for (uint32_t v : by_node[static_cast<size_t>(rr * sheet.cols + cc)]) {
                        if (v == u) continue;
                        field.lateral.add(u, v, cfg.alpha * au * act.values[v]);
                    }
                }
            }
        }
        selforg::normalize_incoming(field.lateral, cfg.budget, /*strict=*/false);
        if (++since_prune >= cfg.prune_every) {
            selforg::prune(field.lateral, cfg.fan_in_cap, cfg.weight_min, cfg.budget);
            since_prune = 0;
        }
    }
    if (since_prune > 0) {
        selforg::prune(field.lateral, cfg.fan_in_cap, cfg.weight_min, cfg.budget);
    }
    return field;
}

SettleResult settle_fragments(const ActivityState& active0, const CorticalField& field,
                              const ThresholdSchedule& sched) {
    if (!(sched.growth > 1.0)) throw InvalidArgument("settle_fragments: growth must exceed 1");
    const size_t n_units = active0.values.size();
    std::vector<char> active(n_units, 0);
    std::vector<uint32_t> current;
    for (uint32_t u = 0; u < n_units; ++u) {
        if (active0.values[u] > 0.0) {
            active[u] = 1;
            current.push_back(u);
        }
    }

    SettleResult res;
    res.state = ActivityState::zeros(active0.sheet);

    const int hard_cap = sched.max_steps + static_cast<int>(current.size());
    double theta = std::min(sched.theta0, sched.theta_max);
    int t = 0;
    while (!current.empty()) {
        std::vector<uint32_t> next;
        next.reserve(current.size());
        std::vector<uint32_t> dropped;
        for (uint32_t u : current) {
            double support = active0.values[u];
            for (const auto& e : field.lateral.incoming(u)) {
                if (active[e.pre]) support += sched.lambda * e.w;
            }
            double margin = support - theta;
            if (margin > -1e-12) {
                if (std::abs(margin) < 1e-12) ++res.boundary_ties;
                next.push_back(u);
            } else {
                dropped.push_back(u);
            }
        }
        bool at_cap = theta >= sched.theta_max;
        for (uint32_t u : dropped) active[u] = 0;
        bool stable = next.size() == current.size();
        current = std::move(next);
        if (stable && at_cap) break;
        ++t;
        if (t > hard_cap) break;
        theta = std::min(sched.theta0 * std::pow(sched.growth, t), sched.theta_max);
    }
    res.steps = t;
    for (uint32_t u : current) res.state.values[u] = active0.values[u];
    return res;
}

CoherentNet coherent_components(const ActivityState& stable, const CorticalField& field,
                                double w_support) {
    std::vector<uint32_t> units = stable.active_units();
    std::vector<char> active(stable.values.size(), 0);
    for (uint32_t u : units) active[u] = 1;

    // undirected adjacency: an edge exists when either direction's weight
    // reaches w_support
    std::vector<std::vector<uint32_t>> adj(stable.values.size());
    for (uint32_t u : units) {
        for (const auto& e : field.lateral.incoming(u)) {
            if (e.w >= w_support && active[e.pre]) {
                adj[u].push_back(e.pre);
                adj[e.pre].push_back(u);
            }
        }
    }

    std::vector<char> seen(stable.values.size(), 0);
    CoherentNet out;
    for (uint32_t seed : units) {
        if (seen[seed]) continue;
        std::vector<uint32_t> stack{seed};
        std::vector<uint32_t> members;
        seen[seed] = 1;
        while (!stack.empty()) {
            uint32_t u = stack.back();
            stack.pop_back();
            members.push_back(u);
            for (uint32_t v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.components.push_back(std::move(members));
    }
    std::sort(out.components.begin(), out.components.end(),
              [](const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
                  if (a.size() != b.size()) return a.size() > b.size();
                  return a.front() < b.front();
              });
    return out;
}

namespace {

struct CanonicalComponent {
    std::vector<std::array<int, 3>> members;  // (dr, dc, f) sorted
    std::vector<std::array<double, 3>> edges;
    int min_r = 0;
    int min_c = 0;
};

CanonicalComponent canonicalize(const std::vector<uint32_t>& units, const CorticalField& field,
                                double w_support) {
    const Sheet& sheet = field.sheet;
    CanonicalComponent cc;
    int min_r = 1 << 30, min_c = 1 << 30;
    for (uint32_t u : units) {
        uint32_t node = sheet.unit_node(u);
        min_r = std::min(min_r, sheet.node_row(node));
        min_c = std::min(min_c, sheet.node_col(node));
    }
    cc.min_r = min_r;
    cc.min_c = min_c;
    std::vector<int32_t> index(sheet.unit_count(), -1);
    for (size_t i = 0; i < units.size(); ++i) {
        uint32_t node = sheet.unit_node(units[i]);
        cc.members.push_back({sheet.node_row(node) - min_r, sheet.node_col(node) - min_c,
                              sheet.unit_feature(units[i])});
        index[units[i]] = static_cast<int32_t>(i);
    }
    // unit-id order is (node, feature) order, so members are already sorted
    for (size_t i = 0; i < units.size(); ++i) {
        for (const auto& e : field.lateral.incoming(units[i])) {
            int32_t j = index[e.pre];
            if (j < 0) continue;
            double w = std::max(e.w, field.lateral.get(e.pre, units[i]));
            if (w < w_support) continue;
            if (static_cast<int32_t>(i) < j) {
                cc.edges.push_back({static_cast<double>(i), static_cast<double>(j), w});
            }
        }
    }
    std::sort(cc.edges.begin(), cc.edges.end());
    return cc;
}

double member_jaccard(const std::vector<std::array<int, 3>>& a,
                      const std::vector<std::array<int, 3>>& b) {
    size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else { ++common; ++i; ++j; }
    }
    size_t uni = a.size() + b.size() - common;
    return uni > 0 ? static_cast<double>(common) / static_cast<double>(uni) : 0.0;
}

}  // namespace

FragmentLibrary extract_fragments(const std::vector<GrayImage>& corpus, const CorticalField& field,
                                  const FragmentsConfig& cfg, const std::vector<int>& tags) {
    const FeatureBank& bank = FeatureBank::instance();
    const double w_support = cfg.w_support();
    ThresholdSchedule sched = ThresholdSchedule::from(cfg);

    FragmentLibrary lib;
    for (size_t idx = 0; idx < corpus.size(); ++idx) {
        ActivityState enc = feature_encode(corpus[idx], bank);
        ActivityState act = exuberant_init(enc, cfg.exuberance_q);
        SettleResult settled = settle_fragments(act, field, sched);
        CoherentNet net = coherent_components(settled.state, field, w_support);
        for (const auto& comp : net.components) {
            if (static_cast<int>(comp.size()) < 2) continue;
            CanonicalComponent cc = canonicalize(comp, field, w_support);
            bool merged = false;
            for (auto& frag : lib.fragments) {
                if (member_jaccard(frag.members, cc.members) >= cfg.jaccard_merge) {
                    ++frag.count;
                    merged = true;
                    break;
                }
            }
            if (!merged) {
                NetFragment frag;
                frag.id = static_cast<int>(lib.fragments.size());
                frag.members = cc.members;
                frag.edges = cc.edges;
                frag.count = 1;
                frag.source_tag = idx < tags.size() ? tags[idx] : -1;
                frag.first_row = cc.min_r;
                frag.first_col = cc.min_c;
                lib.fragments.push_back(std::move(frag));
            }
        }
    }

    FragmentLibrary kept;
    for (auto& frag : lib.fragments) {
        int size = static_cast<int>(frag.members.size());
        if (frag.count < cfg.count_min || size < cfg.size_min || size > cfg.size_max) continue;
        frag.id = static_cast<int>(kept.fragments.size());
        kept.fragments.push_back(std::move(frag));
    }
    return kept;
}

double reactivation_jaccard(const NetFragment& fragment, const ActivityState& stable, int row,
                            int col) {
    if (fragment.members.empty()) return 0.0;
    const Sheet& sheet = stable.sheet;
    int max_r = 0, max_c = 0;
    for (const auto& m : fragment.members) {
        max_r = std::max(max_r, m[0]);
        max_c = std::max(max_c, m[1]);
    }
    double best = 0.0;
    for (int tr = -2; tr <= 2; ++tr) {
        for (int tc = -2; tc <= 2; ++tc) {
            int r0 = row + tr;
            int c0 = col + tc;
            // stable set restricted to the translated hull
            size_t in_hull = 0;
            for (int r = r0; r <= r0 + max_r; ++r) {
                for (int c = c0; c <= c0 + max_c; ++c) {
                    if (r < 0 || r >= sheet.rows || c < 0 || c >= sheet.cols) continue;
                    uint32_t node = sheet.node_of(r, c);
                    for (int f = 0; f < sheet.features; ++f) {
                        if (stable.values[sheet.unit_of(node, f)] > 0.0) ++in_hull;
                    }
                }
            }
            size_t common = 0;
            for (const auto& m : fragment.members) {
                int r = r0 + m[0];
                int c = c0 + m[1];
                if (r < 0 || r >= sheet.rows || c < 0 || c >= sheet.cols) continue;
                if (stable.values[sheet.unit_of(sheet.node_of(r, c), m[2])] > 0.0) ++common;
            }
            size_t uni = fragment.members.size() + in_hull - common;
            double j = uni > 0 ? static_cast<double>(common) / static_cast<double>(uni) : 0.0;
            best = std::max(best, j);
        }
    }
    return best;
}

namespace {

double mean_internal_weight(const std::vector<uint32_t>& members, const CorticalField& field,
                            const std::vector<char>& in_set) {
    if (members.empty()) return 0.0;
    double sum = 0.0;
    for (uint32_t u : members) {
        for (const auto& e : field.lateral.incoming(u)) {
            if (in_set[e.pre]) sum += e.w;
        }
    }
    return sum / static_cast<double>(members.size());
}

void fill_holes(GrayImage& mask) {
    // 4-connected components of the off pixels; those not touching the
    // border are holes and get filled
    const int rows = mask.rows, cols = mask.cols;
    std::vector<int32_t> comp(static_cast<size_t>(rows * cols), -1);
    std::vector<char> touches_border;
    int n_comp = 0;
    for (int i = 0; i < rows * cols; ++i) {
        if (mask.pixels[static_cast<size_t>(i)] != 0.0 || comp[static_cast<size_t>(i)] >= 0) continue;
        std::vector<int> stack{i};
        comp[static_cast<size_t>(i)] = n_comp;
        bool border = false;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            int r = p / cols, c = p % cols;
            if (r == 0 || r == rows - 1 || c == 0 || c == cols - 1) border = true;
            const int dr[4] = {-1, 1, 0, 0};
            const int dc[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                int rr = r + dr[k], cc = c + dc[k];
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                int q = rr * cols + cc;
                if (mask.pixels[static_cast<size_t>(q)] == 0.0 && comp[static_cast<size_t>(q)] < 0) {
                    comp[static_cast<size_t>(q)] = n_comp;
                    stack.push_back(q);
                }
            }
        }
        touches_border.push_back(border ? 1 : 0);
        ++n_comp;
    }
    for (int i = 0; i < rows * cols; ++i) {
        int c = comp[static_cast<size_t>(i)];
        if (c >= 0 && !touches_border[static_cast<size_t>(c)]) mask.pixels[static_cast<size_t>(i)] = 1.0;
    }
}

}  // namespace

SegmentResult figure_ground(const GrayImage& image, const CorticalField& field,
                            const FragmentsConfig& cfg) {
    const FeatureBank& bank = FeatureBank::instance();
    ActivityState enc = feature_encode(image, bank);
    ActivityState act = exuberant_init(enc, cfg.exuberance_q);
    SettleResult settled = settle_fragments(act, field, ThresholdSchedule::from(cfg));
    CoherentNet net = coherent_components(settled.state, field, cfg.w_support());

    SegmentResult res;
    res.mask = GrayImage{image.rows, image.cols,
                         std::vector<double>(static_cast<size_t>(image.rows * image.cols), 0.0)};
    if (net.components.empty()) {
        res.degenerate = true;
        return res;
    }

    std::vector<char> active(settled.state.values.size(), 0);
    for (uint32_t u = 0; u < settled.state.values.size(); ++u) {
        if (settled.state.values[u] > 0.0) active[u] = 1;
    }

    const std::vector<uint32_t>* figure = nullptr;
    if (net.components.size() == 1) {
        figure = &net.components[0];
        res.degenerate = true;
        res.figure_mean_weight = mean_internal_weight(net.components[0], field, active);
    } else {
        std::vector<uint32_t> all_active = settled.state.active_units();
        for (const auto& comp : net.components) {
            std::vector<char> in_comp(settled.state.values.size(), 0);
            for (uint32_t u : comp) in_comp[u] = 1;
            std::vector<uint32_t> complement;
            for (uint32_t u : all_active) {
                if (!in_comp[u]) complement.push_back(u);
            }
            std::vector<char> in_compl(settled.state.values.size(), 0);
            for (uint32_t u : complement) in_compl[u] = 1;
            double mw = mean_internal_weight(comp, field, in_comp);
            double cw = mean_internal_weight(complement, field, in_compl);
            if (mw > cw) {
                figure = &comp;
                res.figure_mean_weight = mw;
                res.ground_mean_weight = cw;
                break;  // components are size-ordered; first hit is the largest
            }
        }
        if (!figure) {
            figure = &net.components[0];
            res.degenerate = true;
            res.figure_mean_weight = mean_internal_weight(net.components[0], field, active);
        }
    }

    const Sheet& sheet = field.sheet;
    for (uint32_t u : *figure) {
        uint32_t node = sheet.unit_node(u);
        int pr = sheet.node_row(node) + 1;  // node -> pixel
        int pc = sheet.node_col(node) + 1;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                int r = pr + dr, c = pc + dc;
                if (r < 0 || r >= image.rows || c < 0 || c >= image.cols) continue;
                res.mask.at(r, c) = 1.0;
            }
        }
    }
    fill_holes(res.mask);
    return res;
}

namespace {

double overlap_fraction(const ActivityState& state, const std::vector<uint32_t>& pattern) {
    if (pattern.empty()) return 0.0;
    size_t n = 0;
    for (uint32_t u : pattern) {
        if (state.values[u] > 0.0) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(pattern.size());
}

}  // namespace

NetSelectionResult net_selection(const ActivityState& input, const CorticalField& field,
                                 const std::vector<uint32_t>& pattern0,
                                 const std::vector<uint32_t>& pattern1,
                                 const ThresholdSchedule& base) {
    if (pattern0.empty() || pattern1.empty()) {
        throw InvalidArgument("net_selection: empty pattern");
    }
    {
        std::vector<uint32_t> a = pattern0, b = pattern1, inter;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
        double frac = static_cast<double>(inter.size()) /
                      static_cast<double>(std::min(a.size(), b.size()));
        if (frac > 0.20 + 1e-12) {
            throw InvalidArgument("net_selection: patterns overlap by more than 20%");
        }
    }

    auto settle_at = [&](double cap) {
        ThresholdSchedule s = base;
        s.theta_max = cap;
        return settle_fragments(input, field, s);
    };
    auto retains = [&](const SettleResult& r, const std::vector<uint32_t>& p) {
        return overlap_fraction(r.state, p) > 0.5;
    };

    NetSelectionResult res;
    // collapse threshold per pattern: sup of caps at which it retains > 50%
    const std::vector<uint32_t>* patterns[2] = {&pattern0, &pattern1};
    for (int i = 0; i < 2; ++i) {
        double lo = base.theta_max;
        SettleResult at_lo = settle_at(lo);
        if (!retains(at_lo, *patterns[i])) {
            res.collapse_theta[i] = 0.0;  // collapses already at the base cap
            continue;
        }
        double hi = lo;
        for (int k = 0; k < 64 && retains(settle_at(hi), *patterns[i]); ++k) hi *= 2.0;
        for (int k = 0; k < 48; ++k) {
            double mid = 0.5 * (lo + hi);
            if (retains(settle_at(mid), *patterns[i])) lo = mid;
            else hi = mid;
        }
        res.collapse_theta[i] = lo;
    }

    int w;
    if (res.collapse_theta[0] != res.collapse_theta[1]) {
        w = res.collapse_theta[0] > res.collapse_theta[1] ? 0 : 1;
    } else {
        w = 0;  // exact tie: lower pattern id
        res.tie_broken = true;
    }

    double theta_star = std::max(base.theta_max,
                                 0.5 * (res.collapse_theta[0] + res.collapse_theta[1]));
    SettleResult final_state = settle_at(theta_star);
    double o0 = overlap_fraction(final_state.state, pattern0);
    double o1 = overlap_fraction(final_state.state, pattern1);
    if (o0 > 0.5 && o1 > 0.5) {
        res.no_winner = true;
        res.final_state = std::move(final_state.state);
        return res;
    }
    res.winner = w;
    res.winner_overlap = w == 0 ? o0 : o1;
    res.loser_overlap = w == 0 ? o1 : o0;
    res.purity = res.winner_overlap;
    res.final_state = std::move(final_state.state);
    return res;
}

void write_fragment_library(const FragmentLibrary& lib, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("fragment library: cannot open for writing: " + path);
    std::fprintf(f, "NFL1 %zu\n", lib.fragments.size());
    for (const auto& frag : lib.fragments) {
        std::fprintf(f, "fragment id=%d count=%d tag=%d at=%d,%d size=%zu edges=%zu\n", frag.id,
                     frag.count, frag.source_tag, frag.first_row, frag.first_col,
                     frag.members.size(), frag.edges.size());
        for (const auto& m : frag.members) std::fprintf(f, "m %d %d %d\n", m[0], m[1], m[2]);
        for (const auto& e : frag.edges) {
            std::fprintf(f, "e %d %d %.17g\n", static_cast<int>(e[0]), static_cast<int>(e[1]),
                         e[2]);
        }
        std::fprintf(f, "end\n");
    }
    std::fclose(f);
}

FragmentLibrary read_fragment_library(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("fragment library: cannot open for reading: " + path);
    FragmentLibrary lib;
    char line[512];
    size_t count = 0;
    if (!std::fgets(line, sizeof(line), f) || std::sscanf(line, "NFL1 %zu", &count) != 1) {
        std::fclose(f);
        throw FormatError("fragment library: bad header");
    }
    for (size_t i = 0; i < count; ++i) {
        NetFragment frag;
        size_t n_members = 0, n_edges = 0;
        if (!std::fgets(line, sizeof(line), f) ||
            std::sscanf(line, "fragment id=%d count=%d tag=%d at=%d,%d size=%zu edges=%zu",
                        &frag.id, &frag.count, &frag.source_tag, &frag.first_row, &frag.first_col,
                        &n_members, &n_edges) != 7) {
            std::fclose(f);
            throw FormatError("fragment library: bad fragment header");
        }
        for (size_t m = 0; m < n_members; ++m) {
            std::array<int, 3> mm{};
            if (!std::fgets(line, sizeof(line), f) ||
                std::sscanf(line, "m %d %d %d", &mm[0], &mm[1], &mm[2]) != 3) {
                std::fclose(f);
                throw FormatError("fragment library: bad member line");
            }
            frag.members.push_back(mm);
        }
        for (size_t e = 0; e < n_edges; ++e) {
            int a = 0, b = 0;
            double w = 0.0;
            if (!std::fgets(line, sizeof(line), f) ||
                std::sscanf(line, "e %d %d %lg", &a, &b, &w) != 3) {
                std::fclose(f);
                throw FormatError("fragment library: bad edge line");
            }
            frag.edges.push_back({static_cast<double>(a), static_cast<double>(b), w});
        }
        if (!std::fgets(line, sizeof(line), f) || std::strncmp(line, "end", 3) != 0) {
            std::fclose(f);
            throw FormatError("fragment library: missing end marker");
        }
        lib.fragments.push_back(std::move(frag));
    }
    std::fclose(f);
    return lib;
}

}  // namespace netfrag::fragments
