// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. These are the semantics every vectorized backend
// is tested against, and the only implementation used for double precision.
#pragma once

#include <cmath>
#include <cstddef>

namespace pmd::simd::ref {

/// C[m x n] (+)= A[m x k] * B[k x n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = acc;
    }
  }
}

/// C[m x n] (+)= A[m x k] * B[n x k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

/// C[m x n] (+)= A[k x m]^T * B[k x n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[p * lda + i] * b[p * ldb + j];
      c[i * ldc + j] = acc;
    }
  }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

/// y += alpha * x
template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct AdamwStep {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

/// One decoupled-weight-decay Adam update over a flat parameter block.
/// Every backend must reproduce this operation order exactly.
template <class T>
void adamw_update(const AdamwStep& s, T* p, const T* g, T* m, T* v, std::size_t n) {
  const T lr = T(s.lr), b1 = T(s.beta1), b2 = T(s.beta2), eps = T(s.eps);
  const T decay = T(s.lr * s.weight_decay);
  const T one_m_b1 = T(1) - b1, one_m_b2 = T(1) - b2;
  const T inv_bc1 = T(1.0 / s.bias_correction1), inv_bc2 = T(1.0 / s.bias_correction2);
  for (std::size_t i = 0; i < n; ++i) {
    T pi = p[i] - decay * p[i];
    const T mi = b1 * m[i] + one_m_b1 * g[i];
    const T vi = b2 * v[i] + one_m_b2 * (g[i] * g[i]);
    const T mhat = mi * inv_bc1;
    const T vhat = vi * inv_bc2;
    pi = pi - lr * (mhat / (std::sqrt(vhat) + eps));
    m[i] = mi;
    v[i] = vi;
    p[i] = pi;
  }
}

}  // namespace pmd::simd::ref
