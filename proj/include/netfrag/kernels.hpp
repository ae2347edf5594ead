#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "netfrag/substrate.hpp"

// Data-parallel inner loops, each with a serial reference path and an
// OpenMP path. Both paths compute every output element with the same
// per-element serial reduction order, so results are bit-identical
// regardless of mode or thread count.
namespace netfrag::kernels {

enum class ExecMode { serial, openmp };

ExecMode default_mode();
void set_default_mode(ExecMode m);

// y[i] = sum_j w[i][j] * x[pre_j] over the sparse incoming row of post unit i.
void drive(const WeightField& w, const std::vector<double>& x, std::vector<double>& y,
           ExecMode mode = default_mode());

struct KernelOffset {
    int dr;
    int dc;
    double k;
};

// out[node] = sum over offsets of k * a[node + (dr, dc)], truncated at the
// grid border. The offset list carries the kernel shape; (0, 0) is included
// only if present in the list.
void convolve(int rows, int cols, const std::vector<double>& a,
              const std::vector<KernelOffset>& offsets, std::vector<double>& out,
              ExecMode mode = default_mode());

// Rectified 3x3 filter bank responses with contrast normalization.
// Input: image values in [0, 1], row-major rows x cols. Each interior pixel's
// 3x3 patch is centered by subtracting `center`, responses are
// max(0, <filter, patch>) / ||patch||_2, all-zero when the centered patch has
// zero norm. Output: (rows-2) x (cols-2) x n_filters, unit-indexed row-major.
void filter_bank_3x3(int rows, int cols, const std::vector<double>& image,
                     const std::vector<std::array<double, 9>>& filters, double center,
                     std::vector<double>& out, ExecMode mode = default_mode());

// Zero-mean normalized cross-correlation of a patch against every valid
// placement inside an image. scores has (img_rows - m_rows + 1) *
// (img_cols - m_cols + 1) entries, row-major over placements; placements
// where either side has zero variance score 0.
void ncc_scores(int m_rows, int m_cols, const std::vector<double>& patch, int img_rows,
                int img_cols, const std::vector<double>& image, std::vector<double>& scores,
                ExecMode mode = default_mode());

// support[l] = sum of x[l'] over the precomputed support list of link l.
// adj is flattened: links of l are adj[adj_begin[l] .. adj_begin[l+1]).
void gather_support(const std::vector<uint32_t>& adj_begin, const std::vector<uint32_t>& adj,
                    const std::vector<double>& x, std::vector<double>& support,
                    ExecMode mode = default_mode());

}  // namespace netfrag::kernels
