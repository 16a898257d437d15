#pragma once

#include <cstddef>

namespace gtc {

// Row-major C (m x n) = op(A) * op(B), or += when `accumulate` is set.
// op(A) is m x k; A is stored k x m when `trans_a`. Likewise for B.
// Each output row is produced by one worker in a fixed order, so results do
// not depend on the thread count.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate);

}  // namespace gtc
