// SPDX-License-Identifier: Apache-2.0
#include "pmd/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

namespace pmd::simd {
namespace {

Backend detect() {
  if (const char* env = std::getenv("PMD_SIMD"); env && std::string_view(env) == "scalar")
    return Backend::Scalar;
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported())
    throw std::runtime_error("AVX2 backend requested but not supported by this CPU");
  current().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  if (active_backend() == Backend::Avx2) return avx2::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  if (active_backend() == Backend::Avx2) return avx2::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  ref::gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  if (active_backend() == Backend::Avx2) return avx2::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  ref::gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

float dot(const float* x, const float* y, std::size_t n) {
  if (active_backend() == Backend::Avx2) return avx2::dot(x, y, n);
  return ref::dot(x, y, n);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  if (active_backend() == Backend::Avx2) return avx2::axpy(n, alpha, x, y);
  ref::axpy(n, alpha, x, y);
}

void adamw_update(const AdamwStep& s, float* p, const float* g, float* m, float* v,
                  std::size_t n) {
  if (active_backend() == Backend::Avx2) return avx2::adamw_update(s, p, g, m, v, n);
  ref::adamw_update(s, p, g, m, v, n);
}

}  // namespace pmd::simd
