#include "netfrag/kernels.hpp"

#include <array>
#include <atomic>
#include <cmath>

namespace netfrag::kernels {

namespace {
std::atomic<ExecMode> g_mode{ExecMode::openmp};
}

ExecMode default_mode() { return g_mode.load(std::memory_order_relaxed); }
void set_default_mode(ExecMode m) { g_mode.store(m, std::memory_order_relaxed); }

void drive(const WeightField& w, const std::vector<double>& x, std::vector<double>& y,
           ExecMode mode) {
    const int n = static_cast<int>(w.post_units());
    y.assign(static_cast<size_t>(n), 0.0);
    if (mode == ExecMode::serial) {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const auto& e : w.incoming(static_cast<uint32_t>(i))) acc += e.w * x[e.pre];
            y[static_cast<size_t>(i)] = acc;
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const auto& e : w.incoming(static_cast<uint32_t>(i))) acc += e.w * x[e.pre];
            y[static_cast<size_t>(i)] = acc;
        }
    }
}

namespace {

inline double convolve_at(int rows, int cols, const std::vector<double>& a,
                          const std::vector<KernelOffset>& offsets, int r, int c) {
    double acc = 0.0;
    for (const auto& o : offsets) {
        int rr = r + o.dr;
        int cc = c + o.dc;
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        acc += o.k * a[static_cast<size_t>(rr * cols + cc)];
    }
    return acc;
}

}  // namespace

void convolve(int rows, int cols, const std::vector<double>& a,
              const std::vector<KernelOffset>& offsets, std::vector<double>& out,
              ExecMode mode) {
    const int n = rows * cols;
    out.assign(static_cast<size_t>(n), 0.0);
    if (mode == ExecMode::serial) {
        for (int i = 0; i < n; ++i) {
            out[static_cast<size_t>(i)] = convolve_at(rows, cols, a, offsets, i / cols, i % cols);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            out[static_cast<size_t>(i)] = convolve_at(rows, cols, a, offsets, i / cols, i % cols);
        }
    }
}

namespace {

inline void encode_pixel(int rows, int cols, const std::vector<double>& image,
                         const std::vector<std::array<double, 9>>& filters, double center,
                         int r, int c, double* out) {
    (void)rows;
    double patch[9];
    double norm2 = 0.0;
    int k = 0;
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            double v = image[static_cast<size_t>((r + dr) * cols + (c + dc))] - center;
            patch[k++] = v;
            norm2 += v * v;
        }
    }
    const size_t nf = filters.size();
    if (norm2 <= 0.0) {
        for (size_t f = 0; f < nf; ++f) out[f] = 0.0;
        return;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (size_t f = 0; f < nf; ++f) {
        double dot = 0.0;
        for (int j = 0; j < 9; ++j) dot += filters[f][j] * patch[j];
        out[f] = dot > 0.0 ? dot * inv : 0.0;
    }
}

}  // namespace

void filter_bank_3x3(int rows, int cols, const std::vector<double>& image,
                     const std::vector<std::array<double, 9>>& filters, double center,
                     std::vector<double>& out, ExecMode mode) {
    if (rows < 3 || cols < 3) throw InvalidArgument("filter_bank_3x3: image too small");
    const int orows = rows - 2;
    const int ocols = cols - 2;
    const int n = orows * ocols;
    const size_t nf = filters.size();
    out.assign(static_cast<size_t>(n) * nf, 0.0);
    if (mode == ExecMode::serial) {
        for (int i = 0; i < n; ++i) {
            encode_pixel(rows, cols, image, filters, center, i / ocols + 1, i % ocols + 1,
                         &out[static_cast<size_t>(i) * nf]);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            encode_pixel(rows, cols, image, filters, center, i / ocols + 1, i % ocols + 1,
                         &out[static_cast<size_t>(i) * nf]);
        }
    }
}

namespace {

inline double ncc_at(int m_rows, int m_cols, const std::vector<double>& patch, double p_mean,
                     double p_var, int img_cols, const std::vector<double>& image, int r, int c) {
    const int n = m_rows * m_cols;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < m_rows; ++i) {
        const double* row = &image[static_cast<size_t>((r + i) * img_cols + c)];
        for (int j = 0; j < m_cols; ++j) {
            s += row[j];
            s2 += row[j] * row[j];
        }
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    if (var <= 1e-15 || p_var <= 1e-15) return 0.0;
    double cross = 0.0;
    for (int i = 0; i < m_rows; ++i) {
        const double* row = &image[static_cast<size_t>((r + i) * img_cols + c)];
        const double* prow = &patch[static_cast<size_t>(i * m_cols)];
        for (int j = 0; j < m_cols; ++j) cross += (prow[j] - p_mean) * (row[j] - mean);
    }
    return cross / (n * std::sqrt(var * p_var));
}

}  // namespace

void ncc_scores(int m_rows, int m_cols, const std::vector<double>& patch, int img_rows,
                int img_cols, const std::vector<double>& image, std::vector<double>& scores,
                ExecMode mode) {
    if (m_rows > img_rows || m_cols > img_cols) {
        throw InvalidArgument("ncc_scores: patch larger than image");
    }
    const int tr = img_rows - m_rows + 1;
    const int tc = img_cols - m_cols + 1;
    const int n = tr * tc;
    scores.assign(static_cast<size_t>(n), 0.0);

    double s = 0.0, s2 = 0.0;
    for (double v : patch) {
        s += v;
        s2 += v * v;
    }
    const int pn = m_rows * m_cols;
    const double p_mean = s / pn;
    const double p_var = s2 / pn - p_mean * p_mean;

    if (mode == ExecMode::serial) {
        for (int t = 0; t < n; ++t) {
            scores[static_cast<size_t>(t)] =
                ncc_at(m_rows, m_cols, patch, p_mean, p_var, img_cols, image, t / tc, t % tc);
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < n; ++t) {
            scores[static_cast<size_t>(t)] =
                ncc_at(m_rows, m_cols, patch, p_mean, p_var, img_cols, image, t / tc, t % tc);
        }
    }
}

void gather_support(const std::vector<uint32_t>& adj_begin, const std::vector<uint32_t>& adj,
                    const std::vector<double>& x, std::vector<double>& support, ExecMode mode) {
    const int n = static_cast<int>(adj_begin.size()) - 1;
    support.assign(static_cast<size_t>(n), 0.0);
    if (mode == ExecMode::serial) {
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (uint32_t k = adj_begin[static_cast<size_t>(l)];
                 k < adj_begin[static_cast<size_t>(l) + 1]; ++k)
                acc += x[adj[k]];
            support[static_cast<size_t>(l)] = acc;
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (uint32_t k = adj_begin[static_cast<size_t>(l)];
                 k < adj_begin[static_cast<size_t>(l) + 1]; ++k)
                acc += x[adj[k]];
            support[static_cast<size_t>(l)] = acc;
        }
    }
}

}  // namespace netfrag::kernels
