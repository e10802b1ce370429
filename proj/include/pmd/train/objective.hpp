// SPDX-License-Identifier: Apache-2.0
//
// Per-step training objective. Every strategy is a weighted sum of three
// slots: (1 - a - b) * CE + a * global + b * local.
//
//   strategy   global slot           local slot
//   none       -                     -
//   pmd        score distillation    MGFD
//   no-mgfd    score distillation    - (b = 0, no masking)
//   lkd        logits KD             - (b = 0, no masking)
//   pkd        logits KD             patient (layer) KD
#pragma once

#include <string>
#include <vector>

#include "pmd/distill/losses.hpp"
#include "pmd/model/bi_encoder.hpp"
#include "pmd/text/masking.hpp"

namespace pmd::train {

enum class Strategy { Pmd, NoMgfd, Lkd, Pkd, None };

const char* strategy_name(Strategy s);
/// Throws ConfigError on unknown names.
Strategy parse_strategy(const std::string& name);
/// True when the strategy feeds masked inputs to the encoders.
bool strategy_masks(Strategy s);

struct ObjectiveConfig {
  Strategy strategy = Strategy::Pmd;
  distill::DistillWeights weights{0.1, 0.1};
  double tau = 0.05;
  double lkd_temperature = 2.0;
  bool diagonal_score = false;
  /// Student block whose token states feed MGFD (1-based, 0 = last). The
  /// teacher block is chosen with layer_map.
  std::size_t feature_layer = 0;
};

struct StepBatch {
  text::MaskedBatch inputs;
  /// Column in the tail list holding each hr row's true tail.
  std::vector<std::size_t> labels;
};

struct StepLosses {
  double total = 0.0;
  double ce = 0.0;
  double global_term = 0.0;
  double local_term = 0.0;
  double local_contribution = 0.0;  // beta * local_term as applied
  bool local_active = false;
  double alpha = 0.0;               // weights actually applied
  double beta = 0.0;
};

/// Effective weights for a batch: beta is forced to 0 when the batch was
/// not masked (rate 0) under pmd, and for strategies without a local slot.
distill::DistillWeights effective_weights(const ObjectiveConfig& cfg, double mask_rate);

/// Forward pass of student (with student_opts) and teacher (eval mode) on the
/// same batch, the strategy's loss and, when grads is non-null, its gradient
/// accumulated into grads. Throws NumericError on a non-finite loss and
/// ConfigError when a distilling strategy has no teacher.
template <class T>
StepLosses compute_step(const model::BiEncoder<T>& student, const model::BiEncoder<T>* teacher,
                        const StepBatch& batch, const ObjectiveConfig& cfg,
                        const model::ForwardOptions& student_opts,
                        model::BiEncoder<T>* grads = nullptr);

}  // namespace pmd::train
