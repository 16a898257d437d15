#include "gtc/gemm.hpp"

#include <algorithm>
#include <vector>

#include "gtc/parallel.hpp"

namespace gtc {
namespace {

std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return out;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  if (k == 0) return;

  // B^T is materialized so the inner loop always streams a contiguous row of B.
  std::vector<double> bt;
  if (trans_b) {
    bt = transposed(b, n, k);
    b = bt.data();
  }
  const std::size_t grain = std::max<std::size_t>(1, 32768 / std::max<std::size_t>(1, n * k));
  parallel_for(0, m, grain, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double* __restrict crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double* __restrict brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

}  // namespace gtc
