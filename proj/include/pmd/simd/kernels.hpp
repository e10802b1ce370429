// SPDX-License-Identifier: Apache-2.0
//
// Runtime-dispatched arithmetic kernels. Single precision routes to the best
// backend the CPU supports (overridable with PMD_SIMD=scalar); double
// precision always uses the scalar reference.
#pragma once

#include <cstddef>

#include "pmd/simd/kernels_ref.hpp"

namespace pmd::simd {

enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
/// Throws std::runtime_error when the backend is not supported on this CPU.
void set_backend(Backend b);
const char* backend_name(Backend b);

using ref::AdamwStep;

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
float dot(const float* x, const float* y, std::size_t n);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void adamw_update(const AdamwStep& s, float* p, const float* g, float* m, float* v,
                  std::size_t n);

inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc, bool accumulate) {
  ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc, bool accumulate) {
  ref::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc, bool accumulate) {
  ref::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline double dot(const double* x, const double* y, std::size_t n) { return ref::dot(x, y, n); }
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  ref::axpy(n, alpha, x, y);
}
inline void adamw_update(const AdamwStep& s, double* p, const double* g, double* m, double* v,
                         std::size_t n) {
  ref::adamw_update(s, p, g, m, v, n);
}

namespace avx2 {
// Direct entry points, exposed for equivalence tests. Only call when
// avx2_supported() is true.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
float dot(const float* x, const float* y, std::size_t n);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void adamw_update(const AdamwStep& s, float* p, const float* g, float* m, float* v,
                  std::size_t n);
}  // namespace avx2

}  // namespace pmd::simd
