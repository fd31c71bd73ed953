#pragma once

#include <cstddef>
#include <vector>

namespace ecal {

// Toggle between the OpenMP kernels and the serial reference versions.
// Both orders of summation are identical element by element, so results
// are bitwise equal either way; the toggle exists for testing and timing.
void set_parallel(bool on);
bool parallel_enabled();
void set_thread_count(int n);
int thread_count();

/// CSR grouping of element indices by segment id. Items are listed in
/// ascending order within each segment, which fixes accumulation order.
struct SegmentIndex {
    std::size_t num_segments = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> items;

    static SegmentIndex build(const std::vector<std::size_t>& seg_of,
                              std::size_t num_segments);

    std::size_t count(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
    std::size_t size() const { return items.size(); }
};

// out[r,c] = sum_k opA(A)[r,k] * opB(B)[k,c]; op is transpose when the flag
// is set. Dimensions are those of the stored (untransposed) matrices.
void gemm_serial(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
                 const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
                 double* out);
void gemm_omp(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
              const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
              double* out);
void gemm(const double* a, std::size_t a_rows, std::size_t a_cols, bool trans_a,
          const double* b, std::size_t b_rows, std::size_t b_cols, bool trans_b,
          double* out);

// out[r,:] = x[r,:] + bias
void add_rowvec_serial(const double* x, std::size_t rows, std::size_t cols,
                       const double* bias, double* out);
void add_rowvec_omp(const double* x, std::size_t rows, std::size_t cols,
                    const double* bias, double* out);
void add_rowvec(const double* x, std::size_t rows, std::size_t cols,
                const double* bias, double* out);

// out[c] = sum_r x[r,c], summed in ascending row order per column
void col_sums_serial(const double* x, std::size_t rows, std::size_t cols, double* out);
void col_sums_omp(const double* x, std::size_t rows, std::size_t cols, double* out);
void col_sums(const double* x, std::size_t rows, std::size_t cols, double* out);

// out[i,:] = x[idx[i],:]
void gather_rows_serial(const double* x, std::size_t cols,
                        const std::size_t* idx, std::size_t n, double* out);
void gather_rows_omp(const double* x, std::size_t cols,
                     const std::size_t* idx, std::size_t n, double* out);
void gather_rows(const double* x, std::size_t cols,
                 const std::size_t* idx, std::size_t n, double* out);

// out[t,:] += sum of g[e,:] over elements e grouped under t, in CSR item
// order. One thread owns each target row, so no atomics are needed and the
// sum order never depends on scheduling.
void scatter_rows_add_serial(const double* g, std::size_t cols,
                             const SegmentIndex& by_target, double* out);
void scatter_rows_add_omp(const double* g, std::size_t cols,
                          const SegmentIndex& by_target, double* out);
void scatter_rows_add(const double* g, std::size_t cols,
                      const SegmentIndex& by_target, double* out);

// out[r,:] = x[r,:] * s[r]
void row_scale_serial(const double* x, std::size_t rows, std::size_t cols,
                      const double* s, double* out);
void row_scale_omp(const double* x, std::size_t rows, std::size_t cols,
                   const double* s, double* out);
void row_scale(const double* x, std::size_t rows, std::size_t cols,
               const double* s, double* out);

// ds[r] = dot(g[r,:], x[r,:])
void row_dot_serial(const double* g, const double* x,
                    std::size_t rows, std::size_t cols, double* ds);
void row_dot_omp(const double* g, const double* x,
                 std::size_t rows, std::size_t cols, double* ds);
void row_dot(const double* g, const double* x,
             std::size_t rows, std::size_t cols, double* ds);

// out[i] = x[i] >= 0 ? x[i] : slope * x[i]
void leaky_relu_serial(const double* x, std::size_t n, double slope, double* out);
void leaky_relu_omp(const double* x, std::size_t n, double slope, double* out);
void leaky_relu(const double* x, std::size_t n, double slope, double* out);

// dx[i] = g[i] * (x[i] > 0 ? 1 : slope)
void leaky_relu_backward_serial(const double* g, const double* x, std::size_t n,
                                double slope, double* dx);
void leaky_relu_backward_omp(const double* g, const double* x, std::size_t n,
                             double slope, double* dx);
void leaky_relu_backward(const double* g, const double* x, std::size_t n,
                         double slope, double* dx);

// Per-segment softmax over a flat score vector, with max subtraction.
// Elements of empty segments do not exist; scores outside any segment are
// not allowed (SegmentIndex covers every element exactly once).
void segment_softmax_serial(const double* v, const SegmentIndex& seg, double* out);
void segment_softmax_omp(const double* v, const SegmentIndex& seg, double* out);
void segment_softmax(const double* v, const SegmentIndex& seg, double* out);

// dv[e] = p[e] * (g[e] - sum_{e' in seg(e)} p[e'] g[e'])
void segment_softmax_backward_serial(const double* g, const double* p,
                                     const SegmentIndex& seg, double* dv);
void segment_softmax_backward_omp(const double* g, const double* p,
                                  const SegmentIndex& seg, double* dv);
void segment_softmax_backward(const double* g, const double* p,
                              const SegmentIndex& seg, double* dv);

// out[s,:] = sum of x[e,:] over the segment, CSR item order; empty -> zeros
void segment_sum_rows_serial(const double* x, std::size_t cols,
                             const SegmentIndex& seg, double* out);
void segment_sum_rows_omp(const double* x, std::size_t cols,
                          const SegmentIndex& seg, double* out);
void segment_sum_rows(const double* x, std::size_t cols,
                      const SegmentIndex& seg, double* out);

// out[s,:] = segment sum / count; empty -> zeros
void segment_mean_rows_serial(const double* x, std::size_t cols,
                              const SegmentIndex& seg, double* out);
void segment_mean_rows_omp(const double* x, std::size_t cols,
                           const SegmentIndex& seg, double* out);
void segment_mean_rows(const double* x, std::size_t cols,
                       const SegmentIndex& seg, double* out);

// out[r,:] = x[r,:] - max_r - log(sum exp(x[r,:] - max_r))
void log_softmax_rows_serial(const double* x, std::size_t rows, std::size_t cols,
                             double* out);
void log_softmax_rows_omp(const double* x, std::size_t rows, std::size_t cols,
                          double* out);
void log_softmax_rows(const double* x, std::size_t rows, std::size_t cols,
                      double* out);

// dx[r,:] = g[r,:] - exp(lsm[r,:]) * rowsum(g[r,:])
void log_softmax_rows_backward_serial(const double* g, const double* lsm,
                                      std::size_t rows, std::size_t cols, double* dx);
void log_softmax_rows_backward_omp(const double* g, const double* lsm,
                                   std::size_t rows, std::size_t cols, double* dx);
void log_softmax_rows_backward(const double* g, const double* lsm,
                               std::size_t rows, std::size_t cols, double* dx);

}  // namespace ecal
