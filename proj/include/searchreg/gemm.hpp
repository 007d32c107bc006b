#pragma once

#include <cstddef>

namespace sreg {

// Row-major matrix products. Each output element is produced by exactly one
// thread with a fixed reduction order, so results are bit-reproducible for
// any thread count.
//
//   gemm:    c[M,N] (+)= a[M,K] * b[K,N]
//   gemm_nt: c[M,N] (+)= a[M,K] * bt[N,K]^T
//   gemm_tn: c[M,N] (+)= at[K,M]^T * b[K,N]
//
// With accumulate == false, c is overwritten.
template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* bt, T* c, bool accumulate);

template <typename T>
void gemm_tn(int m, int n, int k, const T* at, const T* b, T* c, bool accumulate);

}  // namespace sreg
