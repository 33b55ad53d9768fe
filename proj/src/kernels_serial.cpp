#include "shadow/kernels.hpp"

namespace shadow::kernels::serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = alpha * acc + (beta == 0.0 ? 0.0 : beta * c[i * n + j]);
    }
  }
}

void gemm_batched(bool trans_a, bool trans_b, std::size_t batch, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c) {
  for (std::size_t t = 0; t < batch; ++t) {
    gemm(trans_a, trans_b, m, n, k, alpha, a + t * m * k, b + t * k * n, beta, c + t * m * n);
  }
}

void column_sums(std::size_t rows, std::size_t cols, const double* a, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += a[r * cols + c];
  }
}

}  // namespace shadow::kernels::serial
