#include "searchreg/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace sreg {
namespace {

// Register-tiled microkernel: accumulates an MR x NR block of C so each B
// row load feeds MR fused multiply-adds. Writes the tile when `first` says
// this is the initial k block of a non-accumulating product.
template <typename T, int MR, int NR>
void kernel_full(int k, const T* a, long lda, const T* b, long ldb, T* c,
                 long ldc, bool accumulate) {
  T acc[MR][NR] = {};
  for (int p = 0; p < k; ++p) {
    const T* brow = b + std::size_t(p) * ldb;
    for (int i = 0; i < MR; ++i) {
      const T av = a[std::size_t(i) * lda + p];
      for (int j = 0; j < NR; ++j) acc[i][j] += av * brow[j];
    }
  }
  for (int i = 0; i < MR; ++i) {
    T* crow = c + std::size_t(i) * ldc;
    if (accumulate)
      for (int j = 0; j < NR; ++j) crow[j] += acc[i][j];
    else
      for (int j = 0; j < NR; ++j) crow[j] = acc[i][j];
  }
}

template <typename T>
void kernel_edge(int mr, int nr, int k, const T* a, long lda, const T* b,
                 long ldb, T* c, long ldc, bool accumulate) {
  for (int i = 0; i < mr; ++i) {
    T* crow = c + std::size_t(i) * ldc;
    if (!accumulate)
      for (int j = 0; j < nr; ++j) crow[j] = T(0);
    const T* arow = a + std::size_t(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + std::size_t(p) * ldb;
      for (int j = 0; j < nr; ++j) crow[j] += av * brow[j];
    }
  }
}

constexpr int kMR = 8;
constexpr int kNR = 64;
constexpr int kKC = 320;  // k block so the B panel (KC x NC) stays cached
constexpr int kNC = 128;  // column block per thread

// One NC-wide column panel: sweep k blocks, then row tiles, so the B panel
// is read once per k block and C tiles stay hot.
template <typename T>
void gemm_panel(int m, int nc, int k, const T* a, long lda, const T* b,
                long ldb, T* c, long ldc, bool accumulate) {
  for (int kb = 0; kb < k; kb += kKC) {
    const int kc = std::min(kKC, k - kb);
    const bool acc = accumulate || kb > 0;
    for (int i0 = 0; i0 < m; i0 += kMR) {
      const int mr = std::min(kMR, m - i0);
      const T* ab = a + std::size_t(i0) * lda + kb;
      const T* bb = b + std::size_t(kb) * ldb;
      T* cb = c + std::size_t(i0) * ldc;
      for (int j0 = 0; j0 < nc; j0 += kNR) {
        const int nr = std::min(kNR, nc - j0);
        if (mr == kMR && nr == kNR)
          kernel_full<T, kMR, kNR>(kc, ab, lda, bb + j0, ldb, cb + j0, ldc, acc);
        else
          kernel_edge<T>(mr, nr, kc, ab, lda, bb + j0, ldb, cb + j0, ldc, acc);
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * std::size_t(m) * n);
    return;
  }
  const int nb = (n + kNC - 1) / kNC;
  const long work = long(m) * n * k;
#pragma omp parallel for schedule(static) if (work > (1 << 18))
  for (int tb = 0; tb < nb; ++tb) {
    const int j0 = tb * kNC;
    gemm_panel(m, std::min(kNC, n - j0), k, a, k, b + j0, n, c + j0, n,
               accumulate);
  }
}

namespace {

// Dot-product microkernel for C += A * B^T: both operands are contiguous
// along k, so each (i,j) pair is a straight dot product. Lane-split
// accumulators keep a fixed summation order while vectorizing.
template <typename T, int MR, int NR, int L>
void kernel_dot(int mr, int nr, int k, const T* a, long lda, const T* bt,
                long ldb, T* c, long ldc, bool accumulate) {
  T acc[MR][NR][L] = {};
  int p = 0;
  for (; p + L <= k; p += L) {
    for (int i = 0; i < mr; ++i) {
      const T* ar = a + std::size_t(i) * lda + p;
      for (int j = 0; j < nr; ++j) {
        const T* br = bt + std::size_t(j) * ldb + p;
        for (int l = 0; l < L; ++l) acc[i][j][l] += ar[l] * br[l];
      }
    }
  }
  for (int i = 0; i < mr; ++i)
    for (int j = 0; j < nr; ++j) {
      T s = T(0);
      for (int l = 0; l < L; ++l) s += acc[i][j][l];
      for (int q = p; q < k; ++q)
        s += a[std::size_t(i) * lda + q] * bt[std::size_t(j) * ldb + q];
      T* out = c + std::size_t(i) * ldc + j;
      if (accumulate)
        *out += s;
      else
        *out = s;
    }
}

}  // namespace

namespace {

// Cache-tiled out-of-place transpose: dst[j,i] = src[i,j] for src [rows,cols].
template <typename T>
void transpose_into(const T* src, int rows, int cols, T* dst) {
  constexpr int TB = 32;
#pragma omp parallel for schedule(static) collapse(2) if (std::size_t(rows) * cols > (1u << 16))
  for (int i0 = 0; i0 < rows; i0 += TB) {
    for (int j0 = 0; j0 < cols; j0 += TB) {
      const int i1 = std::min(i0 + TB, rows);
      const int j1 = std::min(j0 + TB, cols);
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
          dst[std::size_t(j) * rows + i] = src[std::size_t(i) * cols + j];
    }
  }
}

}  // namespace

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* bt, T* c,
             bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * std::size_t(m) * n);
    return;
  }
  // With enough output rows the transpose amortizes and the blocked kernel
  // wins; skinny products keep the direct dot kernel.
  if (m >= 32 && std::size_t(n) * k > (1u << 14)) {
    std::vector<T> b(std::size_t(k) * n);
    transpose_into(bt, n, k, b.data());
    gemm(m, n, k, a, b.data(), c, accumulate);
    return;
  }
  constexpr int MR = 4, NR = 4, L = 16;
  constexpr int NB = 32;  // B rows per block, keeps the panel in L2
  const int nb = (n + NB - 1) / NB;
  const long work = long(m) * n * k;
#pragma omp parallel for schedule(static) if (work > (1 << 18))
  for (int tb = 0; tb < nb; ++tb) {
    const int jb = tb * NB;
    const int ncols = std::min(NB, n - jb);
    for (int i0 = 0; i0 < m; i0 += MR) {
      const int mr = std::min(MR, m - i0);
      for (int j0 = 0; j0 < ncols; j0 += NR) {
        const int nr = std::min(NR, ncols - j0);
        kernel_dot<T, MR, NR, L>(mr, nr, k, a + std::size_t(i0) * k, k,
                                 bt + std::size_t(jb + j0) * k, k,
                                 c + std::size_t(i0) * n + jb + j0, n,
                                 accumulate);
      }
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* at, const T* b, T* c,
             bool accumulate) {
  // Transpose A once (it is the small operand in every call site), then run
  // the blocked kernel.
  std::vector<T> a(std::size_t(m) * k);
  for (int p = 0; p < k; ++p)
    for (int i = 0; i < m; ++i)
      a[std::size_t(i) * k + p] = at[std::size_t(p) * m + i];
  gemm(m, n, k, a.data(), b, c, accumulate);
}

template void gemm<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_nt<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_nt<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_tn<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_tn<double>(int, int, int, const double*, const double*, double*, bool);

}  // namespace sreg
