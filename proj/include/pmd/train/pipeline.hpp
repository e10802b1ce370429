// SPDX-License-Identifier: Apache-2.0
//
// Baseline training, pre-distillation and grade-by-grade distillation.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmd/eval/ranking.hpp"
#include "pmd/kg/graph.hpp"
#include "pmd/model/bi_encoder.hpp"
#include "pmd/text/sequence.hpp"
#include "pmd/train/adamw.hpp"
#include "pmd/train/objective.hpp"

namespace pmd::train {

enum class InitMode { LayerSelect, Copy, Fresh };
const char* init_mode_name(InitMode m);
InitMode parse_init_mode(const std::string& name);

enum class MaskMode { Decreasing, Fixed };
const char* mask_mode_name(MaskMode m);
MaskMode parse_mask_mode(const std::string& name);

struct StageSpec {
  std::size_t grade = 1;  // encoder depth of the stage's student
  double mask_rate = 0.0;
  distill::DistillWeights weights{0.1, 0.1};
  std::size_t epochs = 10;
  double lr = 3e-4;
  std::size_t batch_size = 32;
  InitMode init = InitMode::LayerSelect;

  /// Throws ConfigError on a rate outside [0, 1], weights outside
  /// [0, 0.5], zero epochs/batch or a non-positive lr.
  void validate() const;
};

/// stages[0] is pre-distillation (same depth as the baseline, copy init);
/// each later stage distills the previous stage's student.
struct DistillSchedule {
  std::vector<StageSpec> stages;
  MaskMode mode = MaskMode::Decreasing;
  Strategy strategy = Strategy::Pmd;

  /// Rates in [0, 0.5], grades strictly decreasing; in decreasing mode the
  /// mask rates are non-increasing. Throws ConfigError.
  void validate() const;
  /// Mask rate stage i trains with: its own rate (decreasing), the first
  /// stage's rate (fixed), or 0 for strategies that do not mask.
  double mask_rate(std::size_t i) const;
};

/// The canonical four-grade schedule: depths top, ... (evenly spaced down to
/// `bottom`) with mask rates 0.2, 0.1, 0.05, 0.
DistillSchedule canonical_schedule(std::size_t top, std::size_t bottom, std::size_t epochs,
                                   double lr, std::size_t batch_size);

struct TrainingData {
  const kg::KnowledgeGraph* graph = nullptr;  // inverse-augmented
  const text::SequenceBuilder* seqs = nullptr;
  const kg::FilterIndex* filter = nullptr;
};

struct TrainOptions {
  ObjectiveConfig objective;  // weights are taken from each StageSpec
  AdamwConfig adamw;          // peak_lr and total_steps are set per stage
  bool mask_tail = true;
  /// Softmax over every entity instead of in-batch tails.
  bool full_softmax = false;
  std::uint64_t seed = 0;
  std::size_t eval_batch_size = 64;
  /// Keep the epoch with the best validation MRR (otherwise the last).
  bool keep_best = true;
  std::ostream* train_log = nullptr;  // one TSV line per step
  std::ostream* valid_log = nullptr;  // one TSV line per epoch
  std::ostream* progress = nullptr;   // human-readable epoch summaries
};

/// Header line of the per-step training log.
std::string train_log_header();
std::string valid_log_header();

struct StageOutcome {
  std::string label;  // "baseline", "pre-distill", "grade-<L>", ...
  StageSpec spec;     // as trained (effective mask rate and weights)
  model::BiEncoder<float> model;
  std::size_t best_epoch = 0;
  eval::RankingMetrics valid;
  eval::RankingMetrics test;
  std::size_t steps = 0;
  double seconds = 0.0;
};

/// Trains one student. teacher may be null only for Strategy::None.
/// Divergence throws NumericError naming the stage and step.
StageOutcome train_stage(const TrainingData& data, const std::string& label, const StageSpec& spec,
                         Strategy strategy, const model::BiEncoder<float>* teacher,
                         model::BiEncoder<float> init, const TrainOptions& options);

/// Cross-entropy only, fresh initialization.
StageOutcome train_baseline(const TrainingData& data, const model::EncoderConfig& config,
                            const StageSpec& spec, const TrainOptions& options,
                            const std::string& label = "baseline");

/// Same-depth student, copy-initialized from the teacher. Throws ConfigError
/// when spec.grade differs from the teacher depth.
StageOutcome pre_distill(const TrainingData& data, const model::BiEncoder<float>& teacher,
                         const StageSpec& spec, Strategy strategy, const TrainOptions& options);

/// Runs schedule stages 1.. starting from `first_teacher` (the pre-distilled
/// model). on_stage is called after every completed stage, so finished
/// outputs survive a later failure.
std::vector<StageOutcome> progressive_distill(
    const TrainingData& data, const DistillSchedule& schedule,
    const model::BiEncoder<float>& first_teacher, const TrainOptions& options,
    const std::function<void(const StageOutcome&)>& on_stage = {});

/// Steps per epoch times epochs for a stage over this data.
std::size_t stage_steps(const TrainingData& data, const StageSpec& spec);

}  // namespace pmd::train
