#include "amc/gemm.hpp"

#include <algorithm>
#include <cstring>

namespace amc {

namespace {

constexpr int kMr = 6;
constexpr int kNr = 32;

// Full register tile: kMr rows of C stay in registers across the k loop.
void tile_full(double* __restrict c, const double* __restrict a, const double* __restrict b,
               int m0, int n0, int k, int lda, int ldb, int ldc, bool accumulate) {
    double acc[kMr][kNr] = {};
    for (int p = 0; p < k; ++p) {
        const double* __restrict brow = b + static_cast<std::size_t>(p) * ldb + n0;
        for (int mi = 0; mi < kMr; ++mi) {
            const double av = a[static_cast<std::size_t>(m0 + mi) * lda + p];
            for (int ni = 0; ni < kNr; ++ni) acc[mi][ni] += av * brow[ni];
        }
    }
    for (int mi = 0; mi < kMr; ++mi) {
        double* crow = c + static_cast<std::size_t>(m0 + mi) * ldc + n0;
        if (accumulate)
            for (int ni = 0; ni < kNr; ++ni) crow[ni] += acc[mi][ni];
        else
            for (int ni = 0; ni < kNr; ++ni) crow[ni] = acc[mi][ni];
    }
}

void tile_edge(double* __restrict c, const double* __restrict a, const double* __restrict b,
               int m0, int n0, int mr, int nr, int k, int lda, int ldb, int ldc,
               bool accumulate) {
    double acc[kMr][kNr] = {};
    for (int p = 0; p < k; ++p) {
        const double* __restrict brow = b + static_cast<std::size_t>(p) * ldb + n0;
        for (int mi = 0; mi < mr; ++mi) {
            const double av = a[static_cast<std::size_t>(m0 + mi) * lda + p];
            for (int ni = 0; ni < nr; ++ni) acc[mi][ni] += av * brow[ni];
        }
    }
    for (int mi = 0; mi < mr; ++mi) {
        double* crow = c + static_cast<std::size_t>(m0 + mi) * ldc + n0;
        if (accumulate)
            for (int ni = 0; ni < nr; ++ni) crow[ni] += acc[mi][ni];
        else
            for (int ni = 0; ni < nr; ++ni) crow[ni] = acc[mi][ni];
    }
}

void gemm_rows(double* c, const double* a, const double* b, int m_begin, int m_end,
               int k, int n, bool accumulate) {
    for (int m0 = m_begin; m0 < m_end; m0 += kMr) {
        const int mr = std::min(kMr, m_end - m0);
        for (int n0 = 0; n0 < n; n0 += kNr) {
            const int nr = std::min(kNr, n - n0);
            if (mr == kMr && nr == kNr)
                tile_full(c, a, b, m0, n0, k, k, n, n, accumulate);
            else
                tile_edge(c, a, b, m0, n0, mr, nr, k, k, n, n, accumulate);
        }
    }
}

// Dot products with 8 fixed partial sums so the reduction vectorizes
// without changing the accumulation order between runs.
double dot8(const double* __restrict x, const double* __restrict y, int k) {
    double s[8] = {};
    int p = 0;
    for (; p + 8 <= k; p += 8)
        for (int l = 0; l < 8; ++l) s[l] += x[p + l] * y[p + l];
    double tail = 0.0;
    for (; p < k; ++p) tail += x[p] * y[p];
    return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7])) + tail;
}

void gemm_abt_rows(double* c, const double* a, const double* b, int m_begin, int m_end,
                   int n, int k, bool accumulate) {
    for (int i = m_begin; i < m_end; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double d = dot8(arow, b + static_cast<std::size_t>(j) * k, k);
            if (accumulate)
                crow[j] += d;
            else
                crow[j] = d;
        }
    }
}

}  // namespace

void gemm(double* c, const double* a, const double* b, int m, int k, int n,
          bool accumulate, bool parallel_rows) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) c[i] = 0.0;
        return;
    }
    if (parallel_rows && m >= 2 * kMr) {
#pragma omp parallel for schedule(static)
        for (int m0 = 0; m0 < m; m0 += kMr)
            gemm_rows(c, a, b, m0, std::min(m0 + kMr, m), k, n, accumulate);
    } else {
        gemm_rows(c, a, b, 0, m, k, n, accumulate);
    }
}

void gemm_abt(double* c, const double* a, const double* b, int m, int n, int k,
              bool accumulate, bool parallel_rows) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) c[i] = 0.0;
        return;
    }
    if (parallel_rows && m >= 4) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) gemm_abt_rows(c, a, b, i, i + 1, n, k, accumulate);
    } else {
        gemm_abt_rows(c, a, b, 0, m, n, k, accumulate);
    }
}

}  // namespace amc
