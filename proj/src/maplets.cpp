#include "netfrag/maplets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "netfrag/kernels.hpp"

namespace netfrag::maplets {

double similarity(const double* a, const double* b, int n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

double similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidArgument("similarity: feature length mismatch");
    return similarity(a.data(), b.data(), static_cast<int>(a.size()));
}

uint32_t ModelStore::store_model(const ActivityState& field, const std::vector<uint8_t>& node_mask,
                                 const std::string& label) {
    const Sheet& sheet = field.sheet;
    if (node_mask.size() != static_cast<size_t>(sheet.node_count())) {
        throw InvalidArgument("store_model: mask size must match the field's node count");
    }
    int min_r = 1 << 30, min_c = 1 << 30, max_r = -1, max_c = -1;
    for (int r = 0; r < sheet.rows; ++r) {
        for (int c = 0; c < sheet.cols; ++c) {
            if (!node_mask[static_cast<size_t>(r * sheet.cols + c)]) continue;
            min_r = std::min(min_r, r);
            min_c = std::min(min_c, c);
            max_r = std::max(max_r, r);
            max_c = std::max(max_c, c);
        }
    }
    if (max_r < 0) throw InvalidArgument("store_model: empty mask");

    StoredModel m;
    m.id = next_id_++;
    m.label = label;
    m.sheet = Sheet{max_r - min_r + 1, max_c - min_c + 1, sheet.features};
    m.origin_row = min_r;
    m.origin_col = min_c;
    m.features.resize(static_cast<size_t>(m.sheet.unit_count()));
    m.mask.resize(static_cast<size_t>(m.sheet.node_count()));
    const int F = sheet.features;
    for (int r = 0; r < m.sheet.rows; ++r) {
        for (int c = 0; c < m.sheet.cols; ++c) {
            uint32_t src_node = sheet.node_of(r + min_r, c + min_c);
            uint32_t dst_node = m.sheet.node_of(r, c);
            m.mask[dst_node] = node_mask[src_node];
            for (int f = 0; f < F; ++f) {
                m.features[m.sheet.unit_of(dst_node, f)] =
                    field.values[sheet.unit_of(src_node, f)];
            }
        }
    }
    models_.push_back(std::move(m));
    return models_.back().id;
}

LinkSet build_links(const StoredModel& model, const ActivityState& image, int k) {
    if (k < 4) throw InvalidArgument("build_links: K must be >= 4");
    if (model.sheet.features != image.sheet.features) {
        throw InvalidArgument("build_links: feature count mismatch");
    }
    LinkSet ls;
    ls.image_sheet = image.sheet;
    ls.model_sheet = model.sheet;
    for (uint32_t n = 0; n < static_cast<uint32_t>(model.sheet.node_count()); ++n) {
        if (model.mask[n]) ls.fg_nodes.push_back(n);
    }
    if (ls.fg_nodes.empty()) throw InvalidArgument("build_links: model has empty foreground");

    const int F = image.sheet.features;
    const int n_img = image.sheet.node_count();
    const int keep = std::min(k, n_img);

    ls.begin.resize(ls.fg_nodes.size() + 1, 0);
    std::vector<std::pair<double, uint32_t>> scored(static_cast<size_t>(n_img));
    for (size_t vi = 0; vi < ls.fg_nodes.size(); ++vi) {
        const double* vf = &model.features[static_cast<size_t>(ls.fg_nodes[vi]) * F];
        for (int u = 0; u < n_img; ++u) {
            double s = similarity(&image.values[static_cast<size_t>(u) * F], vf, F);
            scored[static_cast<size_t>(u)] = {s, static_cast<uint32_t>(u)};
        }
        std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        for (int i = 0; i < keep; ++i) {
            ls.u_node.push_back(scored[static_cast<size_t>(i)].second);
            ls.sim.push_back(scored[static_cast<size_t>(i)].first);
        }
        ls.begin[vi + 1] = static_cast<uint32_t>(ls.u_node.size());
    }
    return ls;
}

namespace {

struct ScaleRun {
    double quality = 0.0;
    double smoothness = 0.0;
    std::vector<uint32_t> winner;      // link index per fg node
    std::vector<double> confidence;    // sim * smooth per fg node
};

ScaleRun relax_one_scale(const LinkSet& ls, const RelaxParams& p, double sigma) {
    const size_t n_links = ls.u_node.size();
    const size_t n_fg = ls.fg_nodes.size();
    const Sheet& ms = ls.model_sheet;
    const Sheet& is = ls.image_sheet;

    // fg index per model node, -1 for background
    std::vector<int32_t> fg_index(static_cast<size_t>(ms.node_count()), -1);
    for (size_t i = 0; i < n_fg; ++i) fg_index[ls.fg_nodes[i]] = static_cast<int32_t>(i);

    // link index per (fg node, image node) for gated lookups
    std::vector<int32_t> link_at(n_fg * static_cast<size_t>(is.node_count()), -1);
    for (size_t vi = 0; vi < n_fg; ++vi) {
        for (uint32_t l = ls.begin[vi]; l < ls.begin[vi + 1]; ++l) {
            link_at[vi * is.node_count() + ls.u_node[l]] = static_cast<int32_t>(l);
        }
    }

    const int drs[4] = {-1, 1, 0, 0};
    const int dcs[4] = {0, 0, -1, 1};

    // support adjacency per link: links (u', v') with v' a 4-neighbor of v
    // and |(u - u') - sigma (v - v')| <= tolerance
    std::vector<uint32_t> adj_begin(n_links + 1, 0);
    std::vector<uint32_t> adj;
    const double tol2 = p.tolerance * p.tolerance;
    for (size_t vi = 0; vi < n_fg; ++vi) {
        int vr = ms.node_row(ls.fg_nodes[vi]);
        int vc = ms.node_col(ls.fg_nodes[vi]);
        for (uint32_t l = ls.begin[vi]; l < ls.begin[vi + 1]; ++l) {
            int ur = is.node_row(ls.u_node[l]);
            int uc = is.node_col(ls.u_node[l]);
            for (int d = 0; d < 4; ++d) {
                int nvr = vr + drs[d];
                int nvc = vc + dcs[d];
                if (nvr < 0 || nvr >= ms.rows || nvc < 0 || nvc >= ms.cols) continue;
                int32_t nvi = fg_index[ms.node_of(nvr, nvc)];
                if (nvi < 0) continue;
                // u' must satisfy |u' - (u + sigma * (v' - v))| <= tolerance
                double pr = ur + sigma * drs[d];
                double pc = uc + sigma * dcs[d];
                int r_lo = static_cast<int>(std::ceil(pr - p.tolerance));
                int r_hi = static_cast<int>(std::floor(pr + p.tolerance));
                int c_lo = static_cast<int>(std::ceil(pc - p.tolerance));
                int c_hi = static_cast<int>(std::floor(pc + p.tolerance));
                for (int rr = r_lo; rr <= r_hi; ++rr) {
                    for (int cc = c_lo; cc <= c_hi; ++cc) {
                        if (rr < 0 || rr >= is.rows || cc < 0 || cc >= is.cols) continue;
                        double er = rr - pr, ec = cc - pc;
                        if (er * er + ec * ec > tol2) continue;
                        int32_t lnk = link_at[static_cast<size_t>(nvi) * is.node_count() +
                                              is.node_of(rr, cc)];
                        if (lnk >= 0) adj.push_back(static_cast<uint32_t>(lnk));
                    }
                }
            }
            adj_begin[l + 1] = static_cast<uint32_t>(adj.size());
        }
    }

    std::vector<double> x(ls.sim);
    std::vector<double> support;
    for (int t = 0; t < p.iterations; ++t) {
        kernels::gather_support(adj_begin, adj, x, support);
        for (size_t l = 0; l < n_links; ++l) {
            x[l] = (1.0 - p.eta) * x[l] + p.eta * ls.sim[l] * (p.epsilon0 + p.beta * support[l]);
        }
        for (size_t vi = 0; vi < n_fg; ++vi) {
            double vmax = 0.0;
            for (uint32_t l = ls.begin[vi]; l < ls.begin[vi + 1]; ++l) vmax = std::max(vmax, x[l]);
            if (vmax > 0.0) {
                double inv = 1.0 / vmax;
                for (uint32_t l = ls.begin[vi]; l < ls.begin[vi + 1]; ++l) x[l] *= inv;
            }
        }
        for (size_t l = 0; l < n_links; ++l) {
            if (!(x[l] >= 0.0 && x[l] <= 1.0 + 1e-9)) {
                throw NumericalFailure("relax: link activity escaped [0, 1]", t);
            }
        }
    }

    ScaleRun run;
    run.winner.resize(n_fg);
    run.confidence.resize(n_fg);
    for (size_t vi = 0; vi < n_fg; ++vi) {
        uint32_t best = ls.begin[vi];
        for (uint32_t l = ls.begin[vi] + 1; l < ls.begin[vi + 1]; ++l) {
            if (x[l] > x[best] || (x[l] == x[best] && ls.u_node[l] < ls.u_node[best])) best = l;
        }
        run.winner[vi] = best;
    }

    double q_sum = 0.0, s_sum = 0.0;
    for (size_t vi = 0; vi < n_fg; ++vi) {
        int vr = ms.node_row(ls.fg_nodes[vi]);
        int vc = ms.node_col(ls.fg_nodes[vi]);
        uint32_t wl = run.winner[vi];
        int ur = is.node_row(ls.u_node[wl]);
        int uc = is.node_col(ls.u_node[wl]);
        int neighbors = 0, consistent = 0;
        for (int d = 0; d < 4; ++d) {
            int nvr = vr + drs[d];
            int nvc = vc + dcs[d];
            if (nvr < 0 || nvr >= ms.rows || nvc < 0 || nvc >= ms.cols) continue;
            int32_t nvi = fg_index[ms.node_of(nvr, nvc)];
            if (nvi < 0) continue;
            ++neighbors;
            uint32_t nl = run.winner[static_cast<size_t>(nvi)];
            double er = (ur - is.node_row(ls.u_node[nl])) - sigma * (vr - nvr);
            double ec = (uc - is.node_col(ls.u_node[nl])) - sigma * (vc - nvc);
            if (er * er + ec * ec <= tol2) ++consistent;
        }
        double smooth = neighbors > 0 ? static_cast<double>(consistent) / neighbors : 1.0;
        run.confidence[vi] = ls.sim[wl] * smooth;
        q_sum += run.confidence[vi];
        s_sum += smooth;
    }
    run.quality = q_sum / static_cast<double>(n_fg);
    run.smoothness = s_sum / static_cast<double>(n_fg);
    return run;
}

}  // namespace

CorrespondenceMap relax(const LinkSet& ls, const RelaxParams& p, int origin_row, int origin_col) {
    if (p.iterations <= 0) throw InvalidArgument("relax: iterations must be > 0");
    if (!(p.eta > 0.0 && p.eta <= 1.0)) throw InvalidArgument("relax: eta must be in (0, 1]");
    if (p.scales.empty()) throw InvalidArgument("relax: empty scale hypothesis set");

    ScaleRun best;
    double best_sigma = p.scales.front();
    bool first = true;
    for (double sigma : p.scales) {
        ScaleRun run = relax_one_scale(ls, p, sigma);
        if (first || run.quality > best.quality) {
            best = std::move(run);
            best_sigma = sigma;
            first = false;
        }
    }

    const Sheet& ms = ls.model_sheet;
    const Sheet& is = ls.image_sheet;
    CorrespondenceMap map;
    map.quality = best.quality;
    map.smoothness = best.smoothness;
    map.scale_hypothesis = best_sigma;

    // confidence-weighted fit of u ~ sigma_fit * (v + origin) + delta
    double cw = 0.0, vr_m = 0.0, vc_m = 0.0, ur_m = 0.0, uc_m = 0.0;
    for (size_t vi = 0; vi < ls.fg_nodes.size(); ++vi) {
        uint32_t wl = best.winner[vi];
        CorrespondenceEntry e;
        e.v_row = ms.node_row(ls.fg_nodes[vi]);
        e.v_col = ms.node_col(ls.fg_nodes[vi]);
        e.u_row = is.node_row(ls.u_node[wl]);
        e.u_col = is.node_col(ls.u_node[wl]);
        e.confidence = best.confidence[vi];
        map.entries.push_back(e);
        double c = e.confidence;
        cw += c;
        vr_m += c * (e.v_row + origin_row);
        vc_m += c * (e.v_col + origin_col);
        ur_m += c * e.u_row;
        uc_m += c * e.u_col;
    }
    if (cw > 0.0) {
        vr_m /= cw;
        vc_m /= cw;
        ur_m /= cw;
        uc_m /= cw;
        double num = 0.0, den = 0.0;
        for (const auto& e : map.entries) {
            double c = e.confidence;
            double dvr = e.v_row + origin_row - vr_m;
            double dvc = e.v_col + origin_col - vc_m;
            num += c * (dvr * (e.u_row - ur_m) + dvc * (e.u_col - uc_m));
            den += c * (dvr * dvr + dvc * dvc);
        }
        map.transform.sigma = den > 0.0 ? num / den : best_sigma;
        map.transform.dr = ur_m - map.transform.sigma * vr_m;
        map.transform.dc = uc_m - map.transform.sigma * vc_m;
    } else {
        map.transform.sigma = best_sigma;
        map.transform.dr = 0.0;
        map.transform.dc = 0.0;
    }
    return map;
}

std::vector<MatchResult> recognize(const ActivityState& image, const ModelStore& store,
                                   const RelaxParams& params, int k) {
    if (store.size() == 0) throw InvalidArgument("recognize: empty model store");
    std::vector<MatchResult> out;
    for (const StoredModel& m : store.models()) {
        LinkSet ls = build_links(m, image, k);
        MatchResult r;
        r.id = m.id;
        r.label = m.label;
        r.map = relax(ls, params, m.origin_row, m.origin_col);
        r.quality = r.map.quality;
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.quality != b.quality) return a.quality > b.quality;
        return a.id < b.id;
    });
    return out;
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
    const unsigned char* p;
    size_t n;
    size_t off = 0;
    void need(size_t k) const {
        if (off + k > n) throw FormatError("model store: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    double f64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[off + i]) << (8 * i);
        off += 8;
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

}  // namespace

void ModelStore::save(const std::string& path) const {
    std::string buf;
    buf.append("NFM1", 4);
    put_u32(buf, static_cast<uint32_t>(models_.size()));
    for (const auto& m : models_) {
        put_u32(buf, m.id);
        put_u32(buf, static_cast<uint32_t>(m.label.size()));
        buf.append(m.label);
        put_u32(buf, static_cast<uint32_t>(m.sheet.rows));
        put_u32(buf, static_cast<uint32_t>(m.sheet.cols));
        put_u32(buf, static_cast<uint32_t>(m.sheet.features));
        put_u32(buf, static_cast<uint32_t>(m.origin_row));
        put_u32(buf, static_cast<uint32_t>(m.origin_col));
        for (double v : m.features) put_f64(buf, v);
        // mask bits packed row-major, LSB first
        uint8_t acc = 0;
        int nbits = 0;
        for (size_t i = 0; i < m.mask.size(); ++i) {
            if (m.mask[i]) acc |= static_cast<uint8_t>(1u << nbits);
            if (++nbits == 8) {
                buf.push_back(static_cast<char>(acc));
                acc = 0;
                nbits = 0;
            }
        }
        if (nbits > 0) buf.push_back(static_cast<char>(acc));
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("model store: cannot open for writing: " + path);
    size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (written != buf.size()) throw FormatError("model store: short write");
}

ModelStore ModelStore::load(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("model store: cannot open for reading: " + path);
    std::string buf;
    char chunk[65536];
    size_t k;
    while ((k = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, k);
    std::fclose(f);

    Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
    r.need(4);
    if (std::memcmp(buf.data(), "NFM1", 4) != 0) throw FormatError("model store: bad magic");
    r.off = 4;
    uint32_t count = r.u32();
    ModelStore store;
    for (uint32_t i = 0; i < count; ++i) {
        StoredModel m;
        m.id = r.u32();
        uint32_t label_len = r.u32();
        r.need(label_len);
        m.label.assign(reinterpret_cast<const char*>(r.p + r.off), label_len);
        r.off += label_len;
        int rows = static_cast<int>(r.u32());
        int cols = static_cast<int>(r.u32());
        int features = static_cast<int>(r.u32());
        if (rows < 1 || cols < 1 || features < 1) throw FormatError("model store: bad dimensions");
        m.origin_row = static_cast<int>(r.u32());
        m.origin_col = static_cast<int>(r.u32());
        m.sheet = Sheet{rows, cols, features};
        m.features.resize(static_cast<size_t>(m.sheet.unit_count()));
        for (double& v : m.features) {
            v = r.f64();
            if (!std::isfinite(v)) throw FormatError("model store: non-finite feature");
        }
        size_t n_nodes = static_cast<size_t>(m.sheet.node_count());
        size_t n_bytes = (n_nodes + 7) / 8;
        r.need(n_bytes);
        m.mask.resize(n_nodes);
        for (size_t b = 0; b < n_nodes; ++b) {
            m.mask[b] = (r.p[r.off + b / 8] >> (b % 8)) & 1u;
        }
        r.off += n_bytes;
        store.models_.push_back(std::move(m));
        store.next_id_ = std::max(store.next_id_, store.models_.back().id + 1);
    }
    if (r.off != buf.size()) throw FormatError("model store: trailing bytes");
    return store;
}

void write_map_csv(const CorrespondenceMap& map, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("correspondence map: cannot open for writing: " + path);
    std::fprintf(f, "v_row,v_col,u_row,u_col,confidence\n");
    for (const auto& e : map.entries) {
        std::fprintf(f, "%d,%d,%d,%d,%.10g\n", e.v_row, e.v_col, e.u_row, e.u_col, e.confidence);
    }
    std::fprintf(f, "summary,Q=%.10g,smoothness=%.10g,dr=%.10g,dc=%.10g,sigma=%.10g\n",
                 map.quality, map.smoothness, map.transform.dr, map.transform.dc,
                 map.transform.sigma);
    std::fclose(f);
}

}  // namespace netfrag::maplets
