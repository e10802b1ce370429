// SPDX-License-Identifier: Apache-2.0
//
// AVX2/FMA single-precision kernels. Compiled with -mavx2 -mfma; only entered
// after the runtime CPU check in kernels.cpp.
//
// Each output element of the gemm kernels is produced by the same instruction
// sequence regardless of which block it falls in, so results for one row do
// not depend on how many other rows are in the batch.
#include <immintrin.h>

#include <cmath>

#include "pmd/simd/kernels.hpp"

namespace pmd::simd::avx2 {
namespace {

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

// Row-major A (a[i*lda + p]) or transposed A (a[p*lda + i]).
struct RowA {
  const float* a;
  std::size_t lda;
  float at(std::size_t i, std::size_t p) const { return a[i * lda + p]; }
};
struct ColA {
  const float* a;
  std::size_t lda;
  float at(std::size_t i, std::size_t p) const { return a[p * lda + i]; }
};

// C[i0..i0+R) x [j0..j0+8*V) over the full k range.
template <int R, int V, class A>
inline void block(const A& a, std::size_t i0, std::size_t j0, std::size_t k, const float* b,
                  std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  __m256 acc[R][V];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v)
      acc[r][v] = accumulate ? _mm256_loadu_ps(c + (i0 + r) * ldc + j0 + 8 * v) : _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    __m256 bv[V];
    for (int v = 0; v < V; ++v) bv[v] = _mm256_loadu_ps(b + p * ldb + j0 + 8 * v);
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_set1_ps(a.at(i0 + r, p));
      for (int v = 0; v < V; ++v) acc[r][v] = _mm256_fmadd_ps(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) _mm256_storeu_ps(c + (i0 + r) * ldc + j0 + 8 * v, acc[r][v]);
}

template <int R, class A>
inline void row_block(const A& a, std::size_t i0, std::size_t n, std::size_t k, const float* b,
                      std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) block<R, 2>(a, i0, j, k, b, ldb, c, ldc, accumulate);
  for (; j + 8 <= n; j += 8) block<R, 1>(a, i0, j, k, b, ldb, c, ldc, accumulate);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      float acc = accumulate ? c[(i0 + r) * ldc + j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a.at(i0 + r, p), b[p * ldb + j], acc);
      c[(i0 + r) * ldc + j] = acc;
    }
  }
}

template <class A>
void gemm_broadcast(const A& a, std::size_t m, std::size_t n, std::size_t k, const float* b,
                    std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_block<4>(a, i, n, k, b, ldb, c, ldc, accumulate);
  switch (m - i) {
    case 3: row_block<3>(a, i, n, k, b, ldb, c, ldc, accumulate); break;
    case 2: row_block<2>(a, i, n, k, b, ldb, c, ldc, accumulate); break;
    case 1: row_block<1>(a, i, n, k, b, ldb, c, ldc, accumulate); break;
    default: break;
  }
}

// Dot products of one A row against J rows of B.
template <int J>
inline void dot_block(const float* arow, const float* b, std::size_t ldb, std::size_t k,
                      float* out) {
  __m256 acc[J];
  for (int j = 0; j < J; ++j) acc[j] = _mm256_setzero_ps();
  std::size_t p = 0;
  for (; p + 8 <= k; p += 8) {
    const __m256 av = _mm256_loadu_ps(arow + p);
    for (int j = 0; j < J; ++j)
      acc[j] = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + j * ldb + p), acc[j]);
  }
  for (int j = 0; j < J; ++j) {
    float s = hsum(acc[j]);
    for (std::size_t q = p; q < k; ++q) s = std::fma(arow[q], b[j * ldb + q], s);
    out[j] = s;
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  gemm_broadcast(RowA{a, lda}, m, n, k, b, ldb, c, ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  gemm_broadcast(ColA{a, lda}, m, n, k, b, ldb, c, ldc, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  float tmp[4];
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * lda;
    float* crow = c + i * ldc;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      dot_block<4>(arow, b + j * ldb, ldb, k, tmp);
      for (int t = 0; t < 4; ++t) crow[j + t] = accumulate ? crow[j + t] + tmp[t] : tmp[t];
    }
    for (; j < n; ++j) {
      dot_block<1>(arow, b + j * ldb, ldb, k, tmp);
      crow[j] = accumulate ? crow[j] + tmp[0] : tmp[0];
    }
  }
}

float dot(const float* x, const float* y, std::size_t n) {
  float out;
  dot_block<1>(x, y, 0, n, &out);
  return out;
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void adamw_update(const AdamwStep& s, float* p, const float* g, float* m, float* v,
                  std::size_t n) {
  // Same operation order as ref::adamw_update, no fused multiply-adds, so the
  // result is bit-identical to the scalar reference.
  const float lr = float(s.lr), b1 = float(s.beta1), b2 = float(s.beta2), eps = float(s.eps);
  const float decay = float(s.lr * s.weight_decay);
  const float one_m_b1 = 1.0f - b1, one_m_b2 = 1.0f - b2;
  const float inv_bc1 = float(1.0 / s.bias_correction1), inv_bc2 = float(1.0 / s.bias_correction2);
  const __m256 vlr = _mm256_set1_ps(lr), vb1 = _mm256_set1_ps(b1), vb2 = _mm256_set1_ps(b2);
  const __m256 veps = _mm256_set1_ps(eps), vdecay = _mm256_set1_ps(decay);
  const __m256 v1b1 = _mm256_set1_ps(one_m_b1), v1b2 = _mm256_set1_ps(one_m_b2);
  const __m256 vbc1 = _mm256_set1_ps(inv_bc1), vbc2 = _mm256_set1_ps(inv_bc2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 pv = _mm256_loadu_ps(p + i);
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 pi = _mm256_sub_ps(pv, _mm256_mul_ps(vdecay, pv));
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(v1b1, gv));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(v1b2, _mm256_mul_ps(gv, gv)));
    const __m256 mhat = _mm256_mul_ps(mi, vbc1);
    const __m256 vhat = _mm256_mul_ps(vi, vbc2);
    const __m256 upd = _mm256_div_ps(mhat, _mm256_add_ps(_mm256_sqrt_ps(vhat), veps));
    pi = _mm256_sub_ps(pi, _mm256_mul_ps(vlr, upd));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    _mm256_storeu_ps(p + i, pi);
  }
  if (i < n) ref::adamw_update(s, p + i, g + i, m + i, v + i, n - i);
}

}  // namespace pmd::simd::avx2
