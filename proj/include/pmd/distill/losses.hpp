// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pmd/model/encoder.hpp"
#include "pmd/scoring/scoring.hpp"
#include "pmd/tensor.hpp"

namespace pmd::distill {

/// Weights of the two distillation terms. The cross-entropy term receives
/// 1 - alpha - beta.
struct DistillWeights {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Throws ConfigError unless alpha, beta >= 0 and alpha + beta <= 1.
void validate(const DistillWeights& w);

/// (1 - alpha - beta) * ce + alpha * score + beta * feature.
double combined_loss(double ce, double score, double feature, const DistillWeights& w);

/// Student and teacher outputs of one tower plus its masked positions.
template <class T>
struct TowerFeatures {
  const model::EncoderOutput<T>* student = nullptr;
  const model::EncoderOutput<T>* teacher = nullptr;
  const std::vector<std::vector<std::uint32_t>>* masked = nullptr;
};

struct FeatureLoss {
  double value = 0.0;
  bool active = false;       // false when no position was masked
  std::size_t positions = 0; // masked positions contributing
};

/// Mean over masked positions (all towers) of the per-position squared
/// error averaged over the hidden dimension. Exactly 0 and inactive when no
/// position is masked. When grads is non-null it receives one packed
/// gradient tensor per tower. Throws ConfigError on layout mismatch.
template <class T>
FeatureLoss mgfd_loss(std::span<const TowerFeatures<T>> towers,
                      std::vector<Tensor<T>>* grads = nullptr);

/// Mean squared difference between student and teacher raw scores, over the
/// whole matrix or only its diagonal.
template <class T>
double score_distill_loss(const scoring::ScoreMatrix<T>& student,
                          const scoring::ScoreMatrix<T>& teacher, bool diagonal_only = false,
                          Tensor<T>* d_student_raw = nullptr);

/// Row-averaged KL(teacher || student) between softmax(scaled / temp)
/// distributions, multiplied by temp^2. Gradient is with respect to the
/// student raw scores.
template <class T>
double lkd_loss(const scoring::ScoreMatrix<T>& student, const scoring::ScoreMatrix<T>& teacher,
                double temperature, Tensor<T>* d_student_raw = nullptr);

/// Mean squared error between L2-normalized pooled states of student layer j
/// and teacher layer map[j], averaged over rows, hidden units and layers.
template <class T>
double pkd_loss(std::span<const Tensor<T>> student_layers,
                std::span<const Tensor<T>> teacher_layers, std::span<const std::size_t> map,
                std::vector<Tensor<T>>* d_student_layers = nullptr);

}  // namespace pmd::distill
