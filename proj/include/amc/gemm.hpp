#pragma once

#include <cstddef>

namespace amc {

// C(M x N) = A(M x K) * B(K x N), row-major. accumulate adds into C.
// Accumulation order over k is fixed per element, so results are
// bit-identical for any thread count.
void gemm(double* c, const double* a, const double* b, int m, int k, int n,
          bool accumulate = false, bool parallel_rows = false);

// C(M x N) = A(M x K) * B(N x K)^T, i.e. C[i][j] = dot(A row i, B row j).
void gemm_abt(double* c, const double* a, const double* b, int m, int n, int k,
              bool accumulate = false, bool parallel_rows = false);

}  // namespace amc
