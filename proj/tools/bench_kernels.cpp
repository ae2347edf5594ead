// Compares the serial reference path of every kernel against the OpenMP
// path: wall time, speedup, and bitwise agreement of the outputs.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "netfrag/kernels.hpp"
#include "netfrag/selforg.hpp"
#include "netfrag/substrate.hpp"

using namespace netfrag;
using kernels::ExecMode;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

void report(const char* name, double serial_ms, double omp_ms, bool equal) {
    std::printf("%-16s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   bitwise %s\n", name,
                serial_ms, omp_ms, serial_ms / omp_ms, equal ? "equal" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
    std::printf("threads: %d, reps: %d\n", omp_get_max_threads(), reps);
#else
    std::printf("built without OpenMP, reps: %d\n", reps);
#endif

    RngStream rng(7, 0);

    {  // sparse drive: dense 32x32 -> 32x32 field
        Sheet pre = new_sheet(32, 32, 1);
        Sheet post = new_sheet(32, 32, 1);
        InitParams ip;
        ip.noise_amplitude = 0.5;
        WeightField w = init_weight_field(pre, post, ip, rng);
        std::vector<double> x(static_cast<size_t>(pre.unit_count()));
        for (double& v : x) v = rng.uniform();
        std::vector<double> ys, yp;
        double ts = time_ms([&] { kernels::drive(w, x, ys, ExecMode::serial); }, reps);
        double tp = time_ms([&] { kernels::drive(w, x, yp, ExecMode::openmp); }, reps);
        report("drive", ts, tp, bits_equal(ys, yp));
    }

    {  // difference-of-Gaussians convolution on a 128x128 grid
        selforg::LateralKernel k;
        k.excite_amp = 1.0;
        k.excite_radius = 1.5;
        k.inhibit_amp = 0.5;
        k.inhibit_radius = 4.0;
        std::vector<kernels::KernelOffset> offs;
        for (int dr = -12; dr <= 12; ++dr) {
            for (int dc = -12; dc <= 12; ++dc) {
                if (dr == 0 && dc == 0) continue;
                double d = std::sqrt(static_cast<double>(dr * dr + dc * dc));
                if (d > 12.0) continue;
                offs.push_back({dr, dc, k.eval(d)});
            }
        }
        std::vector<double> a(128 * 128);
        for (double& v : a) v = rng.uniform();
        std::vector<double> os, op;
        double ts = time_ms([&] { kernels::convolve(128, 128, a, offs, os, ExecMode::serial); }, reps);
        double tp = time_ms([&] { kernels::convolve(128, 128, a, offs, op, ExecMode::openmp); }, reps);
        report("convolve", ts, tp, bits_equal(os, op));
    }

    {  // filter bank on a 256x256 image
        std::vector<double> img(256 * 256);
        for (double& v : img) v = rng.uniform();
        const auto& bank = netfrag::fragments::FeatureBank::instance();
        std::vector<double> os, op;
        double ts = time_ms(
            [&] { kernels::filter_bank_3x3(256, 256, img, bank.filters, 0.5, os, ExecMode::serial); },
            reps);
        double tp = time_ms(
            [&] { kernels::filter_bank_3x3(256, 256, img, bank.filters, 0.5, op, ExecMode::openmp); },
            reps);
        report("filter_bank", ts, tp, bits_equal(os, op));
    }

    {  // cross-correlation of a 12x12 patch over a 128x128 image
        std::vector<double> patch(12 * 12), img(128 * 128);
        for (double& v : patch) v = rng.uniform();
        for (double& v : img) v = rng.uniform();
        std::vector<double> os, op;
        double ts = time_ms(
            [&] { kernels::ncc_scores(12, 12, patch, 128, 128, img, os, ExecMode::serial); }, reps);
        double tp = time_ms(
            [&] { kernels::ncc_scores(12, 12, patch, 128, 128, img, op, ExecMode::openmp); }, reps);
        report("ncc", ts, tp, bits_equal(os, op));
    }

    {  // link-support gather: 20k links, 24 supporters each
        const int n_links = 20000, per = 24;
        std::vector<uint32_t> begin(n_links + 1), adj;
        std::vector<double> x(n_links);
        for (int l = 0; l < n_links; ++l) {
            begin[static_cast<size_t>(l) + 1] = begin[static_cast<size_t>(l)] + per;
            for (int j = 0; j < per; ++j) {
                adj.push_back(static_cast<uint32_t>(rng.uniform_int(n_links)));
            }
            x[static_cast<size_t>(l)] = rng.uniform();
        }
        std::vector<double> os, op;
        double ts = time_ms(
            [&] { kernels::gather_support(begin, adj, x, os, ExecMode::serial); }, reps);
        double tp = time_ms(
            [&] { kernels::gather_support(begin, adj, x, op, ExecMode::openmp); }, reps);
        report("gather_support", ts, tp, bits_equal(os, op));
    }

    return 0;
}
