#include <gtest/gtest.h>

#include <omp.h>

#include <random>
#include <vector>

#include "shadow/kernels.hpp"

using namespace shadow;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Textbook triple loop on explicit indices.
std::vector<double> naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                               const std::vector<double>& a, const std::vector<double>& b, double beta,
                               std::vector<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        s += av * bv;
      }
      c[i * n + j] = alpha * s + beta * c[i * n + j];
    }
  }
  return c;
}

}  // namespace

TEST(Gemm, MatchesNaiveForAllTransposes) {
  std::mt19937_64 rng(1);
  for (auto [m, n, k] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {3, 5, 7}, {64, 33, 17},
                         {200, 130, 90}}) {
    for (int t = 0; t < 4; ++t) {
      const bool ta = t & 1, tb = t & 2;
      const auto a = random_vec(rng, m * k);
      const auto b = random_vec(rng, k * n);
      const auto c0 = random_vec(rng, m * n);
      const auto want = naive_gemm(ta, tb, m, n, k, 0.7, a, b, 0.3, c0);
      auto par = c0;
      kernels::gemm(ta, tb, m, n, k, 0.7, a.data(), b.data(), 0.3, par.data());
      auto ser = c0;
      kernels::serial::gemm(ta, tb, m, n, k, 0.7, a.data(), b.data(), 0.3, ser.data());
      for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(par[i], want[i], 1e-10);
        EXPECT_NEAR(ser[i], want[i], 1e-10);
      }
    }
  }
}

TEST(Gemm, ParallelEqualsSerialBitwise) {
  std::mt19937_64 rng(2);
  const std::size_t m = 257, n = 128, k = 300;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  for (int t = 0; t < 4; ++t) {
    const bool ta = t & 1, tb = t & 2;
    std::vector<double> ser(m * n, 0.0);
    kernels::serial::gemm(ta, tb, m, n, k, 1.0, a.data(), b.data(), 0.0, ser.data());
    for (int threads : {1, 2, 8}) {
      omp_set_num_threads(threads);
      std::vector<double> par(m * n, 0.0);
      kernels::gemm(ta, tb, m, n, k, 1.0, a.data(), b.data(), 0.0, par.data());
      EXPECT_EQ(par, ser) << threads << " " << t;
    }
  }
  omp_set_num_threads(1);
}

TEST(Gemm, RowResultsIndependentOfBatchSize) {
  std::mt19937_64 rng(3);
  const std::size_t n = 64, k = 96;
  const auto a = random_vec(rng, 300 * k);
  const auto b = random_vec(rng, k * n);
  std::vector<double> big(300 * n, 0.0);
  kernels::gemm(false, false, 300, n, k, 1.0, a.data(), b.data(), 0.0, big.data());
  std::vector<double> row(n, 0.0);
  kernels::gemm(false, false, 1, n, k, 1.0, a.data() + 123 * k, b.data(), 0.0, row.data());
  for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(row[j], big[123 * n + j]);
}

TEST(GemmBatched, MatchesPerBatchGemm) {
  std::mt19937_64 rng(4);
  const std::size_t batch = 6, m = 7, n = 5, k = 9;
  for (int t = 0; t < 4; ++t) {
    const bool ta = t & 1, tb = t & 2;
    const auto a = random_vec(rng, batch * m * k);
    const auto b = random_vec(rng, batch * k * n);
    std::vector<double> par(batch * m * n, 1.0), ser(batch * m * n, 1.0);
    kernels::gemm_batched(ta, tb, batch, m, n, k, 1.0, a.data(), b.data(), 1.0, par.data());
    kernels::serial::gemm_batched(ta, tb, batch, m, n, k, 1.0, a.data(), b.data(), 1.0, ser.data());
    for (std::size_t i = 0; i < batch; ++i) {
      std::vector<double> sa(a.begin() + i * m * k, a.begin() + (i + 1) * m * k);
      std::vector<double> sb(b.begin() + i * k * n, b.begin() + (i + 1) * k * n);
      const auto want = naive_gemm(ta, tb, m, n, k, 1.0, sa, sb, 1.0, std::vector<double>(m * n, 1.0));
      for (std::size_t j = 0; j < m * n; ++j) {
        EXPECT_NEAR(par[i * m * n + j], want[j], 1e-12);
        EXPECT_NEAR(ser[i * m * n + j], want[j], 1e-12);
      }
    }
  }
}

TEST(ColumnSums, MatchesSerial) {
  std::mt19937_64 rng(5);
  const std::size_t rows = 1000, cols = 70;
  const auto a = random_vec(rng, rows * cols);
  std::vector<double> par(cols, 0.5), ser(cols, 0.5);
  kernels::column_sums(rows, cols, a.data(), par.data());
  kernels::serial::column_sums(rows, cols, a.data(), ser.data());
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.5;
    for (std::size_t i = 0; i < rows; ++i) s += a[i * cols + j];
    EXPECT_NEAR(par[j], s, 1e-10);
    EXPECT_EQ(par[j], ser[j]);
  }
}

TEST(Axpy, Accumulates) {
  std::vector<double> x{1, 2, 3}, y{1, 1, 1};
  kernels::axpy(3, 2.0, x.data(), y.data());
  EXPECT_EQ(y, (std::vector<double>{3, 5, 7}));
}
