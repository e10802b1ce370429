// SPDX-License-Identifier: Apache-2.0
#include "pmd/scoring/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pmd/error.hpp"
#include "pmd/simd/kernels.hpp"

namespace pmd::scoring {
namespace {

template <class T>
std::vector<double> row_norms(const Tensor<T>& x, const char* what) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = norm<T>(x.row(i));
    if (!(out[i] > 0.0) || !std::isfinite(out[i]))
      throw NumericError(std::string("zero or non-finite norm in ") + what + " row " +
                         std::to_string(i));
  }
  return out;
}

}  // namespace

template <class T>
double norm(std::span<const T> v) {
  double acc = 0.0;
  for (const T x : v) acc += double(x) * double(x);
  return std::sqrt(acc);
}

template <class T>
double cosine_score(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ConfigError("cosine_score: dimension mismatch");
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("cosine_score: zero vector (degenerate encoder output)");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
  return dot / (na * nb);
}

template <class T>
ScoreMatrix<T> score_matrix(const Tensor<T>& hr, const Tensor<T>& tails, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (hr.rows() == 0 || tails.rows() == 0) throw ConfigError("score_matrix: empty input");
  if (hr.cols() != tails.cols()) throw ConfigError("score_matrix: dimension mismatch");
  const std::size_t b = hr.rows(), c = tails.rows(), d = hr.cols();
  const auto nh = row_norms(hr, "hr"), nt = row_norms(tails, "tail");
  Tensor<T> uh(b, d), ut(c, d);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < d; ++k) uh(i, k) = static_cast<T>(hr(i, k) / nh[i]);
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t k = 0; k < d; ++k) ut(j, k) = static_cast<T>(tails(j, k) / nt[j]);
  ScoreMatrix<T> m;
  m.temperature = temperature;
  m.raw = Tensor<T>(b, c);
  simd::gemm_nt(b, c, d, uh.data(), d, ut.data(), d, m.raw.data(), c, false);
  for (auto& v : m.raw.values()) v = std::clamp(v, T(-1), T(1));
  return m;
}

template <class T>
void score_matrix_backward(const Tensor<T>& hr, const Tensor<T>& tails, const ScoreMatrix<T>& m,
                           const Tensor<T>& d_raw, Tensor<T>& d_hr, Tensor<T>& d_tails) {
  const std::size_t b = hr.rows(), c = tails.rows(), d = hr.cols();
  const auto nh = row_norms(hr, "hr"), nt = row_norms(tails, "tail");
  if (d_hr.size() == 0) d_hr = Tensor<T>(b, d);
  if (d_tails.size() == 0) d_tails = Tensor<T>(c, d);
  // d cos(u, v) / du = (v_hat - cos * u_hat) / |u|
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double g = d_raw(i, j);
      if (g == 0.0) continue;
      const double cs = m.raw(i, j);
      for (std::size_t k = 0; k < d; ++k) {
        const double uh = hr(i, k) / nh[i], ut = tails(j, k) / nt[j];
        d_hr(i, k) += static_cast<T>(g * (ut - cs * uh) / nh[i]);
        d_tails(j, k) += static_cast<T>(g * (uh - cs * ut) / nt[j]);
      }
    }
  }
}

template <class T>
double cross_entropy_loss(const ScoreMatrix<T>& m, std::span<const std::size_t> labels,
                          Tensor<T>* d_raw) {
  const std::size_t b = m.rows(), c = m.cols();
  if (labels.size() != b) throw ConfigError("cross_entropy_loss: one label per row required");
  if (d_raw) *d_raw = Tensor<T>(b, c);
  double total = 0.0;
  std::vector<double> z(c);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c) throw ConfigError("cross_entropy_loss: label out of range");
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) {
      z[j] = m.scaled(i, j);
      if (!std::isfinite(z[j])) throw NumericError("cross_entropy_loss: non-finite score");
      mx = std::max(mx, z[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    const double lse = mx + std::log(sum);
    total += lse - z[labels[i]];
    if (d_raw) {
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(z[j] - lse);
        (*d_raw)(i, j) = static_cast<T>((p - (j == labels[i] ? 1.0 : 0.0)) / (double(b) * m.temperature));
      }
    }
  }
  return total / double(b);
}

#define PMD_INSTANTIATE(T)                                                                        \
  template double norm<T>(std::span<const T>);                                                    \
  template double cosine_score<T>(std::span<const T>, std::span<const T>);                        \
  template ScoreMatrix<T> score_matrix<T>(const Tensor<T>&, const Tensor<T>&, double);            \
  template void score_matrix_backward<T>(const Tensor<T>&, const Tensor<T>&, const ScoreMatrix<T>&, \
                                         const Tensor<T>&, Tensor<T>&, Tensor<T>&);               \
  template double cross_entropy_loss<T>(const ScoreMatrix<T>&, std::span<const std::size_t>, Tensor<T>*);

PMD_INSTANTIATE(float)
PMD_INSTANTIATE(double)

}  // namespace pmd::scoring
