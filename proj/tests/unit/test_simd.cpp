// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "pmd/rng.hpp"
#include "pmd/simd/kernels.hpp"

using namespace pmd;

namespace {

std::vector<float> random_floats(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

struct Shape {
  std::size_t m, n, k;
};
const Shape kShapes[] = {{1, 1, 1}, {3, 5, 7}, {4, 16, 9}, {5, 17, 33}, {13, 40, 128}, {9, 8, 64}};

enum class Op { NN, NT, TN };

// |c_simd - c_ref| <= tol * sum_p |a_ip b_pj|, the usual dot-product error bound
void compare_gemm(Op op, const Shape& s, bool accumulate) {
  Rng rng(s.m * 1000 + s.n * 10 + s.k);
  const auto a = random_floats(rng, s.m * s.k), b = random_floats(rng, s.k * s.n);
  const auto c0 = random_floats(rng, s.m * s.n);
  auto c_ref = c0, c_vec = c0;
  const std::size_t lda = op == Op::TN ? s.m : s.k;
  const std::size_t ldb = op == Op::NT ? s.k : s.n;
  switch (op) {
    case Op::NN:
      simd::ref::gemm_nn(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_ref.data(), s.n, accumulate);
      simd::avx2::gemm_nn(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_vec.data(), s.n, accumulate);
      break;
    case Op::NT:
      simd::ref::gemm_nt(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_ref.data(), s.n, accumulate);
      simd::avx2::gemm_nt(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_vec.data(), s.n, accumulate);
      break;
    case Op::TN:
      simd::ref::gemm_tn(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_ref.data(), s.n, accumulate);
      simd::avx2::gemm_tn(s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c_vec.data(), s.n, accumulate);
      break;
  }
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = 0; j < s.n; ++j) {
      double bound = accumulate ? std::fabs(c0[i * s.n + j]) : 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const float av = op == Op::TN ? a[p * lda + i] : a[i * lda + p];
        const float bv = op == Op::NT ? b[j * ldb + p] : b[p * ldb + j];
        bound += std::fabs(double(av) * double(bv));
      }
      CHECK(std::fabs(double(c_vec[i * s.n + j]) - double(c_ref[i * s.n + j])) <= 4e-6 * bound + 1e-30);
    }
}

}  // namespace

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!simd::avx2_supported()) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  for (const auto& s : kShapes)
    for (bool acc : {false, true}) {
      compare_gemm(Op::NN, s, acc);
      compare_gemm(Op::NT, s, acc);
      compare_gemm(Op::TN, s, acc);
    }

  Rng rng(5);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 100u}) {
    const auto x = random_floats(rng, n), y = random_floats(rng, n);
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) bound += std::fabs(double(x[i]) * y[i]);
    CHECK(std::fabs(simd::avx2::dot(x.data(), y.data(), n) - simd::ref::dot(x.data(), y.data(), n)) <=
          4e-6 * bound + 1e-30);
    auto y1 = y, y2 = y;
    simd::ref::axpy(n, 0.37f, x.data(), y1.data());
    simd::avx2::axpy(n, 0.37f, x.data(), y2.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-6));
  }
}

TEST_CASE("avx2 adamw update is bit-identical to the reference") {
  if (!simd::avx2_supported()) return;
  Rng rng(11);
  const std::size_t n = 45;
  auto p1 = random_floats(rng, n);
  auto p2 = p1;
  std::vector<float> m1(n, 0), v1(n, 0), m2(n, 0), v2(n, 0);
  for (int t = 1; t <= 5; ++t) {
    const auto g = random_floats(rng, n);
    const simd::AdamwStep s{1e-3 * t, 0.9, 0.999, 1e-8, 0.01, 1 - std::pow(0.9, t), 1 - std::pow(0.999, t)};
    simd::ref::adamw_update(s, p1.data(), g.data(), m1.data(), v1.data(), n);
    simd::avx2::adamw_update(s, p2.data(), g.data(), m2.data(), v2.data(), n);
  }
  CHECK(std::memcmp(p1.data(), p2.data(), n * sizeof(float)) == 0);
  CHECK(std::memcmp(m1.data(), m2.data(), n * sizeof(float)) == 0);
  CHECK(std::memcmp(v1.data(), v2.data(), n * sizeof(float)) == 0);
}

TEST_CASE("dispatched kernels are batch invariant") {
  // Each output row must not depend on how many other rows share the call.
  Rng rng(3);
  const std::size_t m = 13, n = 24, k = 40;
  const auto a = random_floats(rng, m * k), b = random_floats(rng, k * n), bt = random_floats(rng, n * k);
  std::vector<float> full(m * n), one(n);
  simd::gemm_nn(m, n, k, a.data(), k, b.data(), n, full.data(), n, false);
  for (std::size_t i = 0; i < m; ++i) {
    simd::gemm_nn(1, n, k, a.data() + i * k, k, b.data(), n, one.data(), n, false);
    CHECK(std::memcmp(one.data(), full.data() + i * n, n * sizeof(float)) == 0);
  }
  simd::gemm_nt(m, n, k, a.data(), k, bt.data(), k, full.data(), n, false);
  for (std::size_t i = 0; i < m; ++i) {
    simd::gemm_nt(1, n, k, a.data() + i * k, k, bt.data(), k, one.data(), n, false);
    CHECK(std::memcmp(one.data(), full.data() + i * n, n * sizeof(float)) == 0);
  }
}

TEST_CASE("scalar backend matches the reference bit for bit") {
  const auto saved = simd::active_backend();
  simd::set_backend(simd::Backend::Scalar);
  Rng rng(9);
  const std::size_t m = 5, n = 11, k = 17;
  const auto a = random_floats(rng, m * k), b = random_floats(rng, k * n);
  std::vector<float> c1(m * n), c2(m * n);
  simd::gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n, false);
  simd::ref::gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n, false);
  CHECK(c1 == c2);
  CHECK(std::string(simd::backend_name(simd::active_backend())) == "scalar");
  simd::set_backend(saved);
}
