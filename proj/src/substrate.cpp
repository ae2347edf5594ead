#include "netfrag/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace netfrag {

Sheet new_sheet(int rows, int cols, int features) {
    if (rows < 1 || cols < 1 || features < 1) {
        throw InvalidArgument("new_sheet: rows, cols and features must be >= 1");
    }
    return Sheet{rows, cols, features};
}

std::vector<uint32_t> ActivityState::active_units() const {
    std::vector<uint32_t> out;
    for (uint32_t u = 0; u < values.size(); ++u) {
        if (values[u] > 0.0) out.push_back(u);
    }
    return out;
}

double ActivityState::total() const {
    double t = 0.0;
    for (double v : values) t += v;
    return t;
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
    key_ = splitmix64(splitmix64(seed) ^ splitmix64(stream ^ 0xA02B4C5D6E7F8091ull));
}

uint64_t RngStream::next_u64() {
    ++counter_;
    return splitmix64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::gaussian() {
    // Box-Muller; consumes two uniforms per value.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

int RngStream::uniform_int(int n) {
    int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
}

WeightField::WeightField(const Sheet& pre, const Sheet& post, bool lateral)
    : pre_(pre), post_(post), lateral_(lateral) {
    if (lateral && !pre.same_shape(post)) {
        throw InvalidArgument("WeightField: lateral field requires pre == post shape");
    }
    rows_.resize(static_cast<size_t>(post.unit_count()));
}

double WeightField::get(uint32_t post, uint32_t pre) const {
    const auto& row = rows_[post];
    auto it = std::lower_bound(row.begin(), row.end(), pre,
                               [](const WeightEntry& e, uint32_t p) { return e.pre < p; });
    if (it != row.end() && it->pre == pre) return it->w;
    return 0.0;
}

void WeightField::set(uint32_t post, uint32_t pre, double w) {
    if (lateral_ && post == pre) {
        throw InvalidArgument("WeightField: self-connection on lateral field");
    }
    auto& row = rows_[post];
    auto it = std::lower_bound(row.begin(), row.end(), pre,
                               [](const WeightEntry& e, uint32_t p) { return e.pre < p; });
    if (it != row.end() && it->pre == pre) {
        it->w = w;
    } else {
        row.insert(it, WeightEntry{pre, w});
    }
}

void WeightField::add(uint32_t post, uint32_t pre, double dw) {
    if (lateral_ && post == pre) {
        throw InvalidArgument("WeightField: self-connection on lateral field");
    }
    auto& row = rows_[post];
    auto it = std::lower_bound(row.begin(), row.end(), pre,
                               [](const WeightEntry& e, uint32_t p) { return e.pre < p; });
    if (it != row.end() && it->pre == pre) {
        it->w += dw;
    } else {
        row.insert(it, WeightEntry{pre, dw});
    }
}

void WeightField::scale_row(uint32_t post, double factor) {
    for (auto& e : rows_[post]) e.w *= factor;
}

double WeightField::incoming_sum(uint32_t post) const {
    double s = 0.0;
    for (const auto& e : rows_[post]) s += e.w;
    return s;
}

size_t WeightField::nonzero_count() const {
    size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
}

double WeightField::total_weight() const {
    double t = 0.0;
    for (const auto& row : rows_)
        for (const auto& e : row) t += e.w;
    return t;
}

bool WeightField::all_finite() const {
    for (const auto& row : rows_)
        for (const auto& e : row)
            if (!std::isfinite(e.w)) return false;
    return true;
}

double WeightField::l1_distance(const WeightField& a, const WeightField& b) {
    double d = 0.0;
    for (uint32_t i = 0; i < a.post_units(); ++i) {
        const auto& ra = a.rows_[i];
        const auto& rb = b.rows_[i];
        size_t ia = 0, ib = 0;
        while (ia < ra.size() || ib < rb.size()) {
            if (ib >= rb.size() || (ia < ra.size() && ra[ia].pre < rb[ib].pre)) {
                d += std::abs(ra[ia].w);
                ++ia;
            } else if (ia >= ra.size() || rb[ib].pre < ra[ia].pre) {
                d += std::abs(rb[ib].w);
                ++ib;
            } else {
                d += std::abs(ra[ia].w - rb[ib].w);
                ++ia;
                ++ib;
            }
        }
    }
    return d;
}

bool WeightField::equal_weights(const WeightField& o) const {
    if (rows_.size() != o.rows_.size()) return false;
    for (size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].size() != o.rows_[i].size()) return false;
        for (size_t j = 0; j < rows_[i].size(); ++j) {
            if (rows_[i][j].pre != o.rows_[i][j].pre) return false;
            if (rows_[i][j].w != o.rows_[i][j].w) return false;
        }
    }
    return true;
}

void affine_pre_coord(const Sheet& pre, const Sheet& post, int post_r, int post_c,
                      double* pre_r, double* pre_c) {
    double sr = post.rows > 1 ? static_cast<double>(pre.rows - 1) / (post.rows - 1) : 0.0;
    double sc = post.cols > 1 ? static_cast<double>(pre.cols - 1) / (post.cols - 1) : 0.0;
    *pre_r = post_r * sr;
    *pre_c = post_c * sc;
}

namespace {

void normalize_rows_to(WeightField& w, double s) {
    for (uint32_t i = 0; i < w.post_units(); ++i) {
        double sum = w.incoming_sum(i);
        if (sum > 0.0) w.scale_row(i, s / sum);
    }
}

}  // namespace

WeightField init_weight_field(const Sheet& pre, const Sheet& post,
                              const InitParams& params, RngStream& rng) {
    if (params.noise_amplitude < 0.0 || params.noise_amplitude >= 1.0) {
        throw InvalidArgument("init_weight_field: noise_amplitude must be in [0, 1)");
    }
    WeightField w(pre, post, false);
    const int n_pre = pre.unit_count();
    const double base = params.budget / static_cast<double>(n_pre);

    switch (params.mode) {
        case InitMode::identity: {
            if (!pre.same_shape(post)) {
                throw InvalidArgument("init_weight_field: identity requires equal sheet shapes");
            }
            for (uint32_t i = 0; i < static_cast<uint32_t>(post.unit_count()); ++i) {
                w.set(i, i, params.budget);
            }
            return w;
        }
        case InitMode::uniform_noise:
        case InitMode::polarity_biased: {
            // falloff is 1 at the affinely corresponding pre position and 0
            // at the far end of the pre sheet's diagonal.
            const double diag = std::sqrt(static_cast<double>((pre.rows - 1) * (pre.rows - 1) +
                                                              (pre.cols - 1) * (pre.cols - 1)));
            for (uint32_t i = 0; i < static_cast<uint32_t>(post.unit_count()); ++i) {
                uint32_t node = post.unit_node(i);
                double cr = 0.0, cc = 0.0;
                affine_pre_coord(pre, post, post.node_row(node), post.node_col(node), &cr, &cc);
                auto& row = w.incoming_mut(i);
                row.resize(static_cast<size_t>(n_pre));
                for (int j = 0; j < n_pre; ++j) {
                    double v = base * (1.0 + params.noise_amplitude * rng.uniform(-1.0, 1.0));
                    if (params.mode == InitMode::polarity_biased) {
                        uint32_t jn = pre.unit_node(static_cast<uint32_t>(j));
                        double dr = pre.node_row(jn) - cr;
                        double dc = pre.node_col(jn) - cc;
                        double d = std::sqrt(dr * dr + dc * dc);
                        double t = diag > 0.0 ? std::min(d / diag, 1.0) : 0.0;
                        v *= 1.0 + params.polarity_bias * std::cos(1.5707963267948966 * t);
                    }
                    row[static_cast<size_t>(j)] = WeightEntry{static_cast<uint32_t>(j), v};
                }
            }
            normalize_rows_to(w, params.budget);
            return w;
        }
    }
    throw InvalidArgument("init_weight_field: unknown mode");
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(buf, v);
}

struct ByteReader {
    const unsigned char* p;
    size_t n;
    size_t off = 0;

    void need(size_t k) const {
        if (off + k > n) throw FormatError("snapshot: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[off + i]) << (8 * i);
        off += 8;
        return v;
    }
    double f64() {
        uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

}  // namespace

void write_snapshot(const WeightField& field, const std::string& path) {
    if (!field.all_finite()) throw FormatError("snapshot: non-finite weight");
    std::string buf;
    buf.reserve(36 + 16 * field.nonzero_count());
    buf.append("NFW1", 4);
    put_u32(buf, 1);
    put_u32(buf, static_cast<uint32_t>(field.pre_sheet().rows));
    put_u32(buf, static_cast<uint32_t>(field.pre_sheet().cols));
    put_u32(buf, static_cast<uint32_t>(field.post_sheet().rows));
    put_u32(buf, static_cast<uint32_t>(field.post_sheet().cols));
    put_u32(buf, static_cast<uint32_t>(field.pre_sheet().features));
    put_u64(buf, static_cast<uint64_t>(field.nonzero_count()));
    for (uint32_t i = 0; i < field.post_units(); ++i) {
        for (const auto& e : field.incoming(i)) {
            put_u32(buf, i);
            put_u32(buf, e.pre);
            put_f64(buf, e.w);
        }
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("snapshot: cannot open for writing: " + path);
    size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (written != buf.size()) throw FormatError("snapshot: short write: " + path);
}

WeightField read_snapshot(const std::string& path, bool lateral) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("snapshot: cannot open for reading: " + path);
    std::string buf;
    char chunk[65536];
    size_t k;
    while ((k = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, k);
    std::fclose(f);

    ByteReader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};
    r.need(4);
    if (std::memcmp(buf.data(), "NFW1", 4) != 0) throw FormatError("snapshot: bad magic");
    r.off = 4;
    uint32_t version = r.u32();
    if (version != 1) throw FormatError("snapshot: unsupported version");
    int pre_rows = static_cast<int>(r.u32());
    int pre_cols = static_cast<int>(r.u32());
    int post_rows = static_cast<int>(r.u32());
    int post_cols = static_cast<int>(r.u32());
    int features = static_cast<int>(r.u32());
    uint64_t count = r.u64();
    if (pre_rows < 1 || pre_cols < 1 || post_rows < 1 || post_cols < 1 || features < 1) {
        throw FormatError("snapshot: bad dimensions");
    }
    Sheet pre = Sheet{pre_rows, pre_cols, features};
    Sheet post = Sheet{post_rows, post_cols, features};
    WeightField w(pre, post, lateral);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t post_id = r.u32();
        uint32_t pre_id = r.u32();
        double weight = r.f64();
        if (post_id >= static_cast<uint32_t>(post.unit_count()) ||
            pre_id >= static_cast<uint32_t>(pre.unit_count())) {
            throw FormatError("snapshot: unit id out of range");
        }
        if (!std::isfinite(weight)) throw FormatError("snapshot: non-finite weight");
        w.set(post_id, pre_id, weight);
    }
    if (r.off != buf.size()) throw FormatError("snapshot: trailing bytes");
    return w;
}

}  // namespace netfrag
