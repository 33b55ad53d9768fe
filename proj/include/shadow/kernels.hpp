#pragma once

#include <cstddef>

// Dense row-major kernels behind the tensor layer. The default versions are
// OpenMP-parallel; shadow::kernels::serial holds straightforward reference
// loops used by the tests and the benchmark.

namespace shadow::kernels {

/// C = alpha * op(A) * op(B) + beta * C, all row-major.
/// op(A) is m x k, op(B) is k x n; `trans_a` / `trans_b` select the transpose.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c);

/// Batched gemm over `batch` independent matrix triples laid out back to back.
void gemm_batched(bool trans_a, bool trans_b, std::size_t batch, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c);

/// y += x
void axpy(std::size_t n, double alpha, const double* x, double* y);

/// Sum over the rows of a [rows, cols] matrix into out[cols] (accumulating).
void column_sums(std::size_t rows, std::size_t cols, const double* a, double* out);

/// Problems smaller than this many multiply-adds run on one thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

namespace serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c);

void gemm_batched(bool trans_a, bool trans_b, std::size_t batch, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c);

void column_sums(std::size_t rows, std::size_t cols, const double* a, double* out);

}  // namespace serial

}  // namespace shadow::kernels
