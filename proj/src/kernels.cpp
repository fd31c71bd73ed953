#include "ecal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ecal {

namespace {
bool g_parallel = true;
// Work sizes below this stay serial; purely a speed knob, results match.
constexpr std::size_t kParallelCutoff = 4096;

bool use_omp(std::size_t work) {
#ifdef _OPENMP
    return g_parallel && work >= kParallelCutoff && omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}
}  // namespace

void set_parallel(bool on) { g_parallel = on; }
bool parallel_enabled() { return g_parallel; }

void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

SegmentIndex SegmentIndex::build(const std::vector<std::size_t>& seg_of,
                                 std::size_t num_segments) {
    SegmentIndex s;
    s.num_segments = num_segments;
    s.offsets.assign(num_segments + 1, 0);
    for (std::size_t e = 0; e < seg_of.size(); ++e) s.offsets[seg_of[e] + 1]++;
    for (std::size_t i = 0; i < num_segments; ++i) s.offsets[i + 1] += s.offsets[i];
    s.items.resize(seg_of.size());
    std::vector<std::size_t> cursor(s.offsets.begin(), s.offsets.end() - 1);
    for (std::size_t e = 0; e < seg_of.size(); ++e) s.items[cursor[seg_of[e]]++] = e;
    return s;
}

// ---------------------------------------------------------------------------
// gemm

namespace {
inline void gemm_row(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
                     const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
                     std::size_t r, std::size_t n, std::size_t k, double* out) {
    double* dst = out + r * n;
    for (std::size_t c = 0; c < n; ++c) dst[c] = 0.0;
    if (!trans_a && !trans_b) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a[r * a_cols + t];
            const double* brow = b + t * b_cols;
            for (std::size_t c = 0; c < n; ++c) dst[c] += av * brow[c];
        }
    } else if (!trans_a && trans_b) {
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            const double* arow = a + r * a_cols;
            const double* brow = b + c * b_cols;
            for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            dst[c] = acc;
        }
    } else if (trans_a && !trans_b) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a[t * a_cols + r];
            const double* brow = b + t * b_cols;
            for (std::size_t c = 0; c < n; ++c) dst[c] += av * brow[c];
        }
    } else {
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += a[t * a_cols + r] * b[c * b_cols + t];
            dst[c] = acc;
        }
    }
    (void)a_rows;
    (void)b_rows;
}

inline void gemm_dims(std::size_t a_rows, std::size_t a_cols, bool trans_a,
                      std::size_t b_rows, std::size_t b_cols, bool trans_b,
                      std::size_t& m, std::size_t& n, std::size_t& k) {
    m = trans_a ? a_cols : a_rows;
    k = trans_a ? a_rows : a_cols;
    n = trans_b ? b_rows : b_cols;
    (void)trans_b;
    (void)b_cols;
    (void)b_rows;
}
}  // namespace

void gemm_serial(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
                 const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
                 double* out) {
    std::size_t m, n, k;
    gemm_dims(a_rows, a_cols, trans_a, b_rows, b_cols, trans_b, m, n, k);
    for (std::size_t r = 0; r < m; ++r)
        gemm_row(a, a_rows, a_cols, trans_a, b, b_rows, b_cols, trans_b, r, n, k, out);
}

void gemm_omp(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
              const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
              double* out) {
    std::size_t m, n, k;
    gemm_dims(a_rows, a_cols, trans_a, b_rows, b_cols, trans_b, m, n, k);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(m); ++r)
        gemm_row(a, a_rows, a_cols, trans_a, b, b_rows, b_cols, trans_b,
                 static_cast<std::size_t>(r), n, k, out);
}

void gemm(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          double* out) {
    std::size_t m, n, k;
    gemm_dims(a_rows, a_cols, trans_a, b_rows, b_cols, trans_b, m, n, k);
    if (use_omp(m * n * k))
        gemm_omp(a, a_rows, a_cols, trans_a, b, b_rows, b_cols, trans_b, out);
    else
        gemm_serial(a, a_rows, a_cols, trans_a, b, b_rows, b_cols, trans_b, out);
}

// ---------------------------------------------------------------------------
// rowwise elementwise

void add_rowvec_serial(const double* x, std::size_t rows, std::size_t cols,
                       const double* bias, double* out) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
}

void add_rowvec_omp(const double* x, std::size_t rows, std::size_t cols,
                    const double* bias, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[static_cast<std::size_t>(r) * cols + c] =
                x[static_cast<std::size_t>(r) * cols + c] + bias[c];
}

void add_rowvec(const double* x, std::size_t rows, std::size_t cols,
                const double* bias, double* out) {
    if (use_omp(rows * cols))
        add_rowvec_omp(x, rows, cols, bias, out);
    else
        add_rowvec_serial(x, rows, cols, bias, out);
}

void col_sums_serial(const double* x, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
}

void col_sums_omp(const double* x, std::size_t rows, std::size_t cols, double* out) {
    // Each thread owns whole columns; row order within a column is ascending
    // exactly as in the serial version.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cols); ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + static_cast<std::size_t>(c)];
        out[c] = acc;
    }
}

void col_sums(const double* x, std::size_t rows, std::size_t cols, double* out) {
    if (use_omp(rows * cols) && cols > 1)
        col_sums_omp(x, rows, cols, out);
    else
        col_sums_serial(x, rows, cols, out);
}

// ---------------------------------------------------------------------------
// gather / scatter

void gather_rows_serial(const double* x, std::size_t cols,
                        const std::size_t* idx, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i)
        std::memcpy(out + i * cols, x + idx[i] * cols, cols * sizeof(double));
}

void gather_rows_omp(const double* x, std::size_t cols,
                     const std::size_t* idx, std::size_t n, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        std::memcpy(out + static_cast<std::size_t>(i) * cols,
                    x + idx[static_cast<std::size_t>(i)] * cols, cols * sizeof(double));
}

void gather_rows(const double* x, std::size_t cols,
                 const std::size_t* idx, std::size_t n, double* out) {
    if (use_omp(n * cols))
        gather_rows_omp(x, cols, idx, n, out);
    else
        gather_rows_serial(x, cols, idx, n, out);
}

void scatter_rows_add_serial(const double* g, std::size_t cols,
                             const SegmentIndex& by_target, double* out) {
    for (std::size_t t = 0; t < by_target.num_segments; ++t) {
        double* dst = out + t * cols;
        for (std::size_t p = by_target.offsets[t]; p < by_target.offsets[t + 1]; ++p) {
            const double* src = g + by_target.items[p] * cols;
            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
    }
}

void scatter_rows_add_omp(const double* g, std::size_t cols,
                          const SegmentIndex& by_target, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(by_target.num_segments); ++ti) {
        const std::size_t t = static_cast<std::size_t>(ti);
        double* dst = out + t * cols;
        for (std::size_t p = by_target.offsets[t]; p < by_target.offsets[t + 1]; ++p) {
            const double* src = g + by_target.items[p] * cols;
            for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
    }
}

void scatter_rows_add(const double* g, std::size_t cols,
                      const SegmentIndex& by_target, double* out) {
    if (use_omp(by_target.size() * cols))
        scatter_rows_add_omp(g, cols, by_target, out);
    else
        scatter_rows_add_serial(g, cols, by_target, out);
}

// ---------------------------------------------------------------------------
// row scaling

void row_scale_serial(const double* x, std::size_t rows, std::size_t cols,
                      const double* s, double* out) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] * s[r];
}

void row_scale_omp(const double* x, std::size_t rows, std::size_t cols,
                   const double* s, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[static_cast<std::size_t>(r) * cols + c] =
                x[static_cast<std::size_t>(r) * cols + c] * s[static_cast<std::size_t>(r)];
}

void row_scale(const double* x, std::size_t rows, std::size_t cols,
               const double* s, double* out) {
    if (use_omp(rows * cols))
        row_scale_omp(x, rows, cols, s, out);
    else
        row_scale_serial(x, rows, cols, s, out);
}

void row_dot_serial(const double* g, const double* x,
                    std::size_t rows, std::size_t cols, double* ds) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * x[r * cols + c];
        ds[r] = acc;
    }
}

void row_dot_omp(const double* g, const double* x,
                 std::size_t rows, std::size_t cols, double* ds) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            acc += g[static_cast<std::size_t>(r) * cols + c] *
                   x[static_cast<std::size_t>(r) * cols + c];
        ds[r] = acc;
    }
}

void row_dot(const double* g, const double* x,
             std::size_t rows, std::size_t cols, double* ds) {
    if (use_omp(rows * cols))
        row_dot_omp(g, x, rows, cols, ds);
    else
        row_dot_serial(g, x, rows, cols, ds);
}

// ---------------------------------------------------------------------------
// leaky relu

void leaky_relu_serial(const double* x, std::size_t n, double slope, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_omp(const double* x, std::size_t n, double slope, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu(const double* x, std::size_t n, double slope, double* out) {
    if (use_omp(n))
        leaky_relu_omp(x, n, slope, out);
    else
        leaky_relu_serial(x, n, slope, out);
}

void leaky_relu_backward_serial(const double* g, const double* x, std::size_t n,
                                double slope, double* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = g[i] * (x[i] > 0.0 ? 1.0 : slope);
}

void leaky_relu_backward_omp(const double* g, const double* x, std::size_t n,
                             double slope, double* dx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        dx[i] = g[i] * (x[i] > 0.0 ? 1.0 : slope);
}

void leaky_relu_backward(const double* g, const double* x, std::size_t n,
                         double slope, double* dx) {
    if (use_omp(n))
        leaky_relu_backward_omp(g, x, n, slope, dx);
    else
        leaky_relu_backward_serial(g, x, n, slope, dx);
}

// ---------------------------------------------------------------------------
// segment softmax

namespace {
inline void segment_softmax_one(const double* v, const SegmentIndex& seg,
                                std::size_t s, double* out) {
    const std::size_t lo = seg.offsets[s], hi = seg.offsets[s + 1];
    if (lo == hi) return;
    double mx = v[seg.items[lo]];
    for (std::size_t p = lo + 1; p < hi; ++p) mx = std::max(mx, v[seg.items[p]]);
    double z = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
        const double e = std::exp(v[seg.items[p]] - mx);
        out[seg.items[p]] = e;
        z += e;
    }
    for (std::size_t p = lo; p < hi; ++p) out[seg.items[p]] /= z;
}

inline void segment_softmax_backward_one(const double* g, const double* p,
                                         const SegmentIndex& seg, std::size_t s,
                                         double* dv) {
    const std::size_t lo = seg.offsets[s], hi = seg.offsets[s + 1];
    double dot = 0.0;
    for (std::size_t q = lo; q < hi; ++q) dot += p[seg.items[q]] * g[seg.items[q]];
    for (std::size_t q = lo; q < hi; ++q) {
        const std::size_t e = seg.items[q];
        dv[e] = p[e] * (g[e] - dot);
    }
}
}  // namespace

void segment_softmax_serial(const double* v, const SegmentIndex& seg, double* out) {
    for (std::size_t s = 0; s < seg.num_segments; ++s) segment_softmax_one(v, seg, s, out);
}

void segment_softmax_omp(const double* v, const SegmentIndex& seg, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(seg.num_segments); ++s)
        segment_softmax_one(v, seg, static_cast<std::size_t>(s), out);
}

void segment_softmax(const double* v, const SegmentIndex& seg, double* out) {
    if (use_omp(seg.size()))
        segment_softmax_omp(v, seg, out);
    else
        segment_softmax_serial(v, seg, out);
}

void segment_softmax_backward_serial(const double* g, const double* p,
                                     const SegmentIndex& seg, double* dv) {
    for (std::size_t s = 0; s < seg.num_segments; ++s)
        segment_softmax_backward_one(g, p, seg, s, dv);
}

void segment_softmax_backward_omp(const double* g, const double* p,
                                  const SegmentIndex& seg, double* dv) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(seg.num_segments); ++s)
        segment_softmax_backward_one(g, p, seg, static_cast<std::size_t>(s), dv);
}

void segment_softmax_backward(const double* g, const double* p,
                              const SegmentIndex& seg, double* dv) {
    if (use_omp(seg.size()))
        segment_softmax_backward_omp(g, p, seg, dv);
    else
        segment_softmax_backward_serial(g, p, seg, dv);
}

// ---------------------------------------------------------------------------
// segment reductions over rows

namespace {
inline void segment_sum_one(const double* x, std::size_t cols, const SegmentIndex& seg,
                            std::size_t s, double* out) {
    double* dst = out + s * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] = 0.0;
    for (std::size_t p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p) {
        const double* src = x + seg.items[p] * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
}
}  // namespace

void segment_sum_rows_serial(const double* x, std::size_t cols,
                             const SegmentIndex& seg, double* out) {
    for (std::size_t s = 0; s < seg.num_segments; ++s) segment_sum_one(x, cols, seg, s, out);
}

void segment_sum_rows_omp(const double* x, std::size_t cols,
                          const SegmentIndex& seg, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(seg.num_segments); ++s)
        segment_sum_one(x, cols, seg, static_cast<std::size_t>(s), out);
}

void segment_sum_rows(const double* x, std::size_t cols,
                      const SegmentIndex& seg, double* out) {
    if (use_omp(seg.size() * cols))
        segment_sum_rows_omp(x, cols, seg, out);
    else
        segment_sum_rows_serial(x, cols, seg, out);
}

void segment_mean_rows_serial(const double* x, std::size_t cols,
                              const SegmentIndex& seg, double* out) {
    segment_sum_rows_serial(x, cols, seg, out);
    for (std::size_t s = 0; s < seg.num_segments; ++s) {
        const std::size_t n = seg.count(s);
        if (n == 0) continue;
        for (std::size_t c = 0; c < cols; ++c) out[s * cols + c] /= static_cast<double>(n);
    }
}

void segment_mean_rows_omp(const double* x, std::size_t cols,
                           const SegmentIndex& seg, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(seg.num_segments); ++si) {
        const std::size_t s = static_cast<std::size_t>(si);
        segment_sum_one(x, cols, seg, s, out);
        const std::size_t n = seg.count(s);
        if (n == 0) continue;
        for (std::size_t c = 0; c < cols; ++c) out[s * cols + c] /= static_cast<double>(n);
    }
}

void segment_mean_rows(const double* x, std::size_t cols,
                       const SegmentIndex& seg, double* out) {
    if (use_omp(seg.size() * cols))
        segment_mean_rows_omp(x, cols, seg, out);
    else
        segment_mean_rows_serial(x, cols, seg, out);
}

// ---------------------------------------------------------------------------
// row log softmax

namespace {
inline void log_softmax_row(const double* x, std::size_t cols, double* out) {
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
    const double lz = std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[c] = x[c] - mx - lz;
}
}  // namespace

void log_softmax_rows_serial(const double* x, std::size_t rows, std::size_t cols,
                             double* out) {
    for (std::size_t r = 0; r < rows; ++r)
        log_softmax_row(x + r * cols, cols, out + r * cols);
}

void log_softmax_rows_omp(const double* x, std::size_t rows, std::size_t cols,
                          double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
        log_softmax_row(x + static_cast<std::size_t>(r) * cols, cols,
                        out + static_cast<std::size_t>(r) * cols);
}

void log_softmax_rows(const double* x, std::size_t rows, std::size_t cols, double* out) {
    if (use_omp(rows * cols))
        log_softmax_rows_omp(x, rows, cols, out);
    else
        log_softmax_rows_serial(x, rows, cols, out);
}

void log_softmax_rows_backward_serial(const double* g, const double* lsm,
                                      std::size_t rows, std::size_t cols, double* dx) {
    for (std::size_t r = 0; r < rows; ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
            dx[r * cols + c] = g[r * cols + c] - std::exp(lsm[r * cols + c]) * gs;
    }
}

void log_softmax_rows_backward_omp(const double* g, const double* lsm,
                                   std::size_t rows, std::size_t cols, double* dx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(rows); ++ri) {
        const std::size_t r = static_cast<std::size_t>(ri);
        double gs = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
            dx[r * cols + c] = g[r * cols + c] - std::exp(lsm[r * cols + c]) * gs;
    }
}

void log_softmax_rows_backward(const double* g, const double* lsm,
                               std::size_t rows, std::size_t cols, double* dx) {
    if (use_omp(rows * cols))
        log_softmax_rows_backward_omp(g, lsm, rows, cols, dx);
    else
        log_softmax_rows_backward_serial(g, lsm, rows, cols, dx);
}

}  // namespace ecal
