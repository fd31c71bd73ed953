// Times the OpenMP kernels against the serial reference versions and
// verifies that both produce bitwise identical output.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "ecal/kernels.hpp"
#include "ecal/rng.hpp"

namespace {

using ecal::Rng;
using ecal::SegmentIndex;

double time_best_of(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int g_failures = 0;

void report(const std::string& name, double serial_s, double omp_s, bool equal) {
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name.c_str(),
                serial_s * 1e3, omp_s * 1e3, serial_s / omp_s, equal ? "bitwise equal" : "MISMATCH");
    if (!equal) ++g_failures;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

SegmentIndex random_segments(std::size_t items, std::size_t segments, Rng& rng) {
    std::vector<std::size_t> seg_of(items);
    for (std::size_t i = 0; i < items; ++i) seg_of[i] = rng.below(segments);
    return SegmentIndex::build(seg_of, segments);
}

}  // namespace

int main() {
    const int reps = 3;
    Rng rng(42);

    std::printf("threads: %d\n\n", ecal::thread_count());

    {
        const std::size_t m = 384, k = 384, n = 384;
        std::vector<double> a = random_vec(m * k, rng), b = random_vec(k * n, rng);
        std::vector<double> out_s(m * n), out_p(m * n);
        double ts = time_best_of([&] { ecal::gemm_serial(a.data(), m, k, false, b.data(), k, n, false, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::gemm_omp(a.data(), m, k, false, b.data(), k, n, false, out_p.data()); }, reps);
        report("gemm 384x384x384", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        // Weight-gradient shape: out = A^T (64x2048) * B (2048x64).
        const std::size_t rows = 2048, width = 64;
        std::vector<double> a = random_vec(rows * width, rng), b = random_vec(rows * width, rng);
        std::vector<double> out_s(width * width), out_p(width * width);
        double ts = time_best_of([&] { ecal::gemm_serial(a.data(), rows, width, true, b.data(), rows, width, false, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::gemm_omp(a.data(), rows, width, true, b.data(), rows, width, false, out_p.data()); }, reps);
        report("gemm 64x2048^T x 2048x64", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        const std::size_t items = 400000, segments = 30000;
        std::vector<double> v = random_vec(items, rng);
        SegmentIndex seg = random_segments(items, segments, rng);
        std::vector<double> out_s(items), out_p(items);
        double ts = time_best_of([&] { ecal::segment_softmax_serial(v.data(), seg, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::segment_softmax_omp(v.data(), seg, out_p.data()); }, reps);
        report("segment_softmax 400k/30k", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        const std::size_t items = 200000, segments = 20000, cols = 32;
        std::vector<double> x = random_vec(items * cols, rng);
        SegmentIndex seg = random_segments(items, segments, rng);
        std::vector<double> out_s(segments * cols), out_p(segments * cols);
        double ts = time_best_of([&] { ecal::segment_sum_rows_serial(x.data(), cols, seg, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::segment_sum_rows_omp(x.data(), cols, seg, out_p.data()); }, reps);
        report("segment_sum 200k x32", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        const std::size_t rows = 200000, cols = 32, targets = 50000;
        std::vector<double> g = random_vec(rows * cols, rng);
        SegmentIndex by_target = random_segments(rows, targets, rng);
        std::vector<double> out_s(targets * cols, 0.0), out_p(targets * cols, 0.0);
        double ts = time_best_of([&] {
            std::fill(out_s.begin(), out_s.end(), 0.0);
            ecal::scatter_rows_add_serial(g.data(), cols, by_target, out_s.data());
        }, reps);
        double tp = time_best_of([&] {
            std::fill(out_p.begin(), out_p.end(), 0.0);
            ecal::scatter_rows_add_omp(g.data(), cols, by_target, out_p.data());
        }, reps);
        report("scatter_add 200k x32", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        const std::size_t rows = 300000, cols = 16, pool = 100000;
        std::vector<double> x = random_vec(pool * cols, rng);
        std::vector<std::size_t> idx(rows);
        for (std::size_t i = 0; i < rows; ++i) idx[i] = rng.below(pool);
        std::vector<double> out_s(rows * cols), out_p(rows * cols);
        double ts = time_best_of([&] { ecal::gather_rows_serial(x.data(), cols, idx.data(), rows, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::gather_rows_omp(x.data(), cols, idx.data(), rows, out_p.data()); }, reps);
        report("gather 300k x16", ts, tp, bitwise_equal(out_s, out_p));
    }
    {
        const std::size_t rows = 100000, cols = 64;
        std::vector<double> x = random_vec(rows * cols, rng);
        std::vector<double> out_s(rows * cols), out_p(rows * cols);
        double ts = time_best_of([&] { ecal::log_softmax_rows_serial(x.data(), rows, cols, out_s.data()); }, reps);
        double tp = time_best_of([&] { ecal::log_softmax_rows_omp(x.data(), rows, cols, out_p.data()); }, reps);
        report("log_softmax 100k x64", ts, tp, bitwise_equal(out_s, out_p));
    }

    if (g_failures > 0) {
        std::printf("\n%d kernel(s) diverged\n", g_failures);
        return 1;
    }
    std::printf("\nall kernels bitwise equal\n");
    return 0;
}
