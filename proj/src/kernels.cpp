#include "shadow/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include <omp.h>

namespace shadow::kernels {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kDepthBlock = 256;

void scale_c(std::size_t m, std::size_t n, double beta, double* c) {
  if (beta == 1.0) return;
  if (beta == 0.0) {
    std::memset(c, 0, sizeof(double) * m * n);
    return;
  }
  for (std::size_t i = 0; i < m * n; ++i) c[i] *= beta;
}

// Rows [i0, i1) of C += alpha * op(A) * B with B not transposed. A element
// (i, p) sits at a[i * lda_i + p * lda_p].
void rows_times_b(std::size_t i0, std::size_t i1, std::size_t n, std::size_t k, double alpha, const double* a,
                  std::size_t lda_i, std::size_t lda_p, const double* b, double* c) {
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t p1 = std::min(k, p0 + kDepthBlock);
    std::size_t i = i0;
    for (; i + kRowBlock <= i1; i += kRowBlock) {
      double* c0 = c + (i + 0) * n;
      double* c1 = c + (i + 1) * n;
      double* c2 = c + (i + 2) * n;
      double* c3 = c + (i + 3) * n;
      for (std::size_t p = p0; p < p1; ++p) {
        const double a0 = alpha * a[(i + 0) * lda_i + p * lda_p];
        const double a1 = alpha * a[(i + 1) * lda_i + p * lda_p];
        const double a2 = alpha * a[(i + 2) * lda_i + p * lda_p];
        const double a3 = alpha * a[(i + 3) * lda_i + p * lda_p];
        const double* bp = b + p * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) {
          const double bv = bp[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < i1; ++i) {
      double* ci = c + i * n;
      for (std::size_t p = p0; p < p1; ++p) {
        const double av = alpha * a[i * lda_i + p * lda_p];
        const double* bp = b + p * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
}

// Rows [i0, i1) of C += alpha * op(A) * B, B already in [k, n] layout.
void gemm_rows(bool trans_a, std::size_t i0, std::size_t i1, std::size_t m, std::size_t n, std::size_t k,
               double alpha, const double* a, const double* b, double* c) {
  if (trans_a) {
    rows_times_b(i0, i1, n, k, alpha, a, 1, m, b, c);
  } else {
    rows_times_b(i0, i1, n, k, alpha, a, k, 1, b, c);
  }
}

// [batch][n][k] -> [batch][k][n]
std::vector<double> transpose_blocks(std::size_t batch, std::size_t n, std::size_t k, const double* b) {
  std::vector<double> out(batch * n * k);
  for (std::size_t t = 0; t < batch; ++t) {
    const double* src = b + t * n * k;
    double* dst = out.data() + t * n * k;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) dst[p * n + j] = src[j * k + p];
    }
  }
  return out;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  scale_c(m, n, beta, c);
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<double> bt;
  if (trans_b) {
    bt = transpose_blocks(1, n, k, b);
    b = bt.data();
  }
  if (m * n * k < kParallelThreshold || omp_get_max_threads() == 1 || omp_in_parallel()) {
    gemm_rows(trans_a, 0, m, m, n, k, alpha, a, b, c);
    return;
  }
  // Each thread owns whole rows of C, so results do not depend on the thread count.
  const std::size_t chunks = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(chunks); ++ch) {
    const std::size_t i0 = static_cast<std::size_t>(ch) * kRowBlock;
    gemm_rows(trans_a, i0, std::min(m, i0 + kRowBlock), m, n, k, alpha, a, b, c);
  }
}

void gemm_batched(bool trans_a, bool trans_b, std::size_t batch, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c) {
  scale_c(batch * m, n, beta, c);
  if (batch == 0 || m == 0 || n == 0 || k == 0) return;
  std::vector<double> bt;
  if (trans_b) {
    bt = transpose_blocks(batch, n, k, b);
    b = bt.data();
  }
  const bool parallel = batch * m * n * k >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(batch); ++t) {
    gemm_rows(trans_a, 0, m, m, n, k, alpha, a + t * m * k, b + t * k * n, c + t * m * n);
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void column_sums(std::size_t rows, std::size_t cols, const double* a, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) out[c] += ar[c];
  }
}

}  // namespace shadow::kernels
