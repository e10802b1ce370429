// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "pmd/tensor.hpp"

namespace pmd::scoring {

/// Default softmax temperature applied to cosine scores.
inline constexpr double kDefaultTemperature = 0.05;

/// dot(a, b) / (|a| |b|), accumulated in double. Throws NumericError when
/// either vector has zero norm.
template <class T>
double cosine_score(std::span<const T> a, std::span<const T> b);

/// Euclidean norm accumulated in double, in index order. cosine_score uses
/// exactly this, so callers caching norms reproduce its values bit-for-bit.
template <class T>
double norm(std::span<const T> v);

/// Cosine similarities between every (hr row, tail row) pair.
template <class T>
struct ScoreMatrix {
  Tensor<T> raw;  // entries in [-1, 1]
  double temperature = 1.0;

  std::size_t rows() const { return raw.rows(); }
  std::size_t cols() const { return raw.cols(); }
  double scaled(std::size_t i, std::size_t j) const { return double(raw(i, j)) / temperature; }
};

/// Throws NumericError on zero-norm rows, ConfigError on tau <= 0 or empty
/// inputs.
template <class T>
ScoreMatrix<T> score_matrix(const Tensor<T>& hr, const Tensor<T>& tails, double temperature);

/// Given dL/d(raw scores), accumulates dL/d(hr rows) and dL/d(tail rows).
template <class T>
void score_matrix_backward(const Tensor<T>& hr, const Tensor<T>& tails, const ScoreMatrix<T>& m,
                           const Tensor<T>& d_raw, Tensor<T>& d_hr, Tensor<T>& d_tails);

/// Mean over rows of -log softmax(raw / tau)[label]. When d_raw is non-null
/// it receives dL/d(raw). Throws NumericError on non-finite entries.
template <class T>
double cross_entropy_loss(const ScoreMatrix<T>& m, std::span<const std::size_t> labels,
                          Tensor<T>* d_raw = nullptr);

}  // namespace pmd::scoring
