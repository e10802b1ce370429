// SPDX-License-Identifier: Apache-2.0
#include "pmd/train/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pmd/error.hpp"
#include "pmd/text/masking.hpp"

namespace pmd::train {

const char* init_mode_name(InitMode m) {
  switch (m) {
    case InitMode::LayerSelect: return "layer-select";
    case InitMode::Copy: return "copy";
    case InitMode::Fresh: return "fresh";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& name) {
  for (InitMode m : {InitMode::LayerSelect, InitMode::Copy, InitMode::Fresh})
    if (name == init_mode_name(m)) return m;
  throw ConfigError("unknown init mode '" + name + "' (expected layer-select, copy or fresh)");
}

const char* mask_mode_name(MaskMode m) { return m == MaskMode::Fixed ? "fixed" : "decreasing"; }

MaskMode parse_mask_mode(const std::string& name) {
  if (name == "decreasing") return MaskMode::Decreasing;
  if (name == "fixed") return MaskMode::Fixed;
  throw ConfigError("unknown mask mode '" + name + "' (expected decreasing or fixed)");
}

void StageSpec::validate() const {
  if (grade == 0) throw ConfigError("stage grade must be at least 1");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0))
    throw ConfigError("mask rate " + std::to_string(mask_rate) + " outside [0, 1]");
  if (!(weights.alpha >= 0.0 && weights.alpha <= 0.5) || !(weights.beta >= 0.0 && weights.beta <= 0.5))
    throw ConfigError("alpha and beta must lie in [0, 0.5]");
  distill::validate(weights);
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void DistillSchedule::validate() const {
  if (stages.empty()) throw ConfigError("schedule has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].validate();
    if (stages[i].mask_rate > 0.5)
      throw ConfigError("schedule mask rate " + std::to_string(stages[i].mask_rate) + " outside [0, 0.5]");
    if (i > 0 && stages[i].grade >= stages[i - 1].grade)
      throw ConfigError("schedule grades must strictly decrease");
    if (mode == MaskMode::Decreasing && i > 0 && stages[i].mask_rate > stages[i - 1].mask_rate)
      throw ConfigError("mask rates must not increase across stages");
  }
}

double DistillSchedule::mask_rate(std::size_t i) const {
  if (!strategy_masks(strategy)) return 0.0;
  return mode == MaskMode::Fixed ? stages.at(0).mask_rate : stages.at(i).mask_rate;
}

DistillSchedule canonical_schedule(std::size_t top, std::size_t bottom, std::size_t epochs, double lr,
                                   std::size_t batch_size) {
  if (bottom == 0 || top < bottom + 3)
    throw ConfigError("canonical schedule needs top >= bottom + 3 and bottom >= 1");
  DistillSchedule s;
  const double rates[4] = {0.2, 0.1, 0.05, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    StageSpec st;
    // 12, 9, 6, 3 for (12, 3); 4, 3, 2, 1 for (4, 1)
    st.grade = top - (i * (top - bottom) + 1) / 3;
    if (i == 3) st.grade = bottom;
    st.mask_rate = rates[i];
    st.epochs = epochs;
    st.lr = lr;
    st.batch_size = batch_size;
    st.init = i == 0 ? InitMode::Copy : InitMode::LayerSelect;
    s.stages.push_back(st);
  }
  return s;
}

std::string train_log_header() {
  return "stage\tstep\tlr\ttotal\tce\tglobal\tlocal\tlocal_contribution\tmasked";
}
std::string valid_log_header() { return "stage\tepoch\tstep\tvalid_mrr\tbest"; }

std::size_t stage_steps(const TrainingData& data, const StageSpec& spec) {
  const std::size_t n = data.graph->train.size();
  return spec.epochs * ((n + spec.batch_size - 1) / spec.batch_size);
}

namespace {

std::uint64_t label_tag(const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) h = (h ^ c) * 1099511628211ULL;
  return h;
}

void zero(model::BiEncoder<float>& g) {
  g.visit([](const std::string&, Tensor<float>& t) { t.fill(0.0f); });
}

}  // namespace

StageOutcome train_stage(const TrainingData& data, const std::string& label, const StageSpec& spec,
                         Strategy strategy, const model::BiEncoder<float>* teacher,
                         model::BiEncoder<float> init, const TrainOptions& options) {
  spec.validate();
  if (!data.graph || !data.seqs || !data.filter) throw ConfigError("incomplete training data");
  const auto& graph = *data.graph;
  if (graph.train.empty()) throw DataError("no training triples");
  if (init.config().layers != spec.grade)
    throw ConfigError("stage " + label + ": student depth " + std::to_string(init.config().layers) +
                      " does not match grade " + std::to_string(spec.grade));
  if (strategy != Strategy::None && !teacher) throw ConfigError("stage " + label + " needs a teacher");

  const auto t0 = std::chrono::steady_clock::now();
  ObjectiveConfig obj = options.objective;
  obj.strategy = strategy;
  obj.weights = spec.weights;
  AdamwConfig adam = options.adamw;
  adam.peak_lr = spec.lr;
  adam.total_steps = stage_steps(data, spec);
  adam.validate();

  StageOutcome out;
  out.label = label;
  out.spec = spec;
  out.spec.mask_rate = strategy_masks(strategy) ? spec.mask_rate : 0.0;
  const auto eff = effective_weights(obj, out.spec.mask_rate);
  out.spec.weights = eff;

  model::BiEncoder<float> params = std::move(init);
  auto grads = model::BiEncoder<float>::zeros(params.config());
  auto state = make_train_state(params);
  const std::uint64_t tag = label_tag(label);

  std::vector<std::size_t> order(graph.train.size());
  std::vector<text::TokenSequence> all_tails;
  if (options.full_softmax)
    for (std::size_t e = 0; e < graph.entities.size(); ++e)
      all_tails.push_back(data.seqs->tail(static_cast<kg::EntityId>(e)));

  double best_mrr = -1.0;
  model::BiEncoder<float> best = params;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(options.seed, {tag, 1, epoch}));
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t end = std::min(order.size(), start + spec.batch_size);
      std::vector<text::TokenSequence> hr, tails;
      StepBatch batch;
      for (std::size_t i = start; i < end; ++i) {
        const auto& t = graph.train[order[i]];
        hr.push_back(data.seqs->hr(t.head, t.relation));
        if (options.full_softmax) {
          batch.labels.push_back(t.tail);
        } else {
          tails.push_back(data.seqs->tail(t.tail));
          batch.labels.push_back(i - start);
        }
      }
      if (options.full_softmax) tails = all_tails;
      const std::size_t step = state.step;
      Rng mask_rng(derive_seed(options.seed, {tag, 2, step}));
      batch.inputs = text::apply_mask(std::move(hr), std::move(tails), out.spec.mask_rate, mask_rng,
                                      options.mask_tail);
      Rng dropout_rng(derive_seed(options.seed, {tag, 3, step}));
      model::ForwardOptions fopt;
      fopt.train = true;
      fopt.dropout_rng = &dropout_rng;
      zero(grads);
      StepLosses losses;
      try {
        losses = compute_step<float>(params, teacher, batch, obj, fopt, &grads);
        optimizer_step(state, params, grads, adam);
      } catch (const NumericError& e) {
        throw NumericError("stage " + label + " diverged at step " + std::to_string(step) + ": " + e.what());
      }
      if (options.train_log) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6e\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%zu\n", label.c_str(), step,
                      state.lr, losses.total, losses.ce, losses.global_term, losses.local_term,
                      losses.local_contribution, batch.inputs.masked_count());
        *options.train_log << buf;
      }
    }

    const auto valid = eval::evaluate_split(params, graph, *data.seqs, *data.filter, kg::Split::Valid,
                                            {.batch_size = options.eval_batch_size});
    const bool improved = valid.metrics.mrr > best_mrr;
    if (improved || !options.keep_best) {
      best_mrr = valid.metrics.mrr;
      best = params;
      out.best_epoch = epoch;
      out.valid = valid.metrics;
    }
    if (options.valid_log)
      *options.valid_log << label << '\t' << epoch << '\t' << state.step << '\t' << valid.metrics.mrr << '\t'
                         << (improved ? 1 : 0) << '\n';
    if (options.progress)
      *options.progress << label << " epoch " << epoch + 1 << "/" << spec.epochs << " valid MRR "
                        << valid.metrics.mrr << (improved ? " *" : "") << std::endl;
  }
  out.steps = state.step;
  out.model = std::move(best);
  out.test = eval::evaluate_split(out.model, graph, *data.seqs, *data.filter, kg::Split::Test,
                                  {.batch_size = options.eval_batch_size})
                 .metrics;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

StageOutcome train_baseline(const TrainingData& data, const model::EncoderConfig& config,
                            const StageSpec& spec, const TrainOptions& options, const std::string& label) {
  model::EncoderConfig cfg = config;
  cfg.layers = spec.grade;
  auto init = model::BiEncoder<float>::init(cfg, derive_seed(options.seed, {label_tag(label), 0}));
  StageSpec s = spec;
  s.weights = {0.0, 0.0};
  s.mask_rate = 0.0;
  return train_stage(data, label, s, Strategy::None, nullptr, std::move(init), options);
}

StageOutcome pre_distill(const TrainingData& data, const model::BiEncoder<float>& teacher,
                         const StageSpec& spec, Strategy strategy, const TrainOptions& options) {
  if (spec.grade != teacher.config().layers)
    throw ConfigError("pre-distillation student depth " + std::to_string(spec.grade) +
                      " differs from teacher depth " + std::to_string(teacher.config().layers));
  model::BiEncoder<float> init = teacher;
  if (spec.init == InitMode::Fresh)
    init = model::BiEncoder<float>::init(teacher.config(), derive_seed(options.seed, {label_tag("pre-distill"), 0}));
  return train_stage(data, "pre-distill", spec, strategy, &teacher, std::move(init), options);
}

std::vector<StageOutcome> progressive_distill(const TrainingData& data, const DistillSchedule& schedule,
                                              const model::BiEncoder<float>& first_teacher,
                                              const TrainOptions& options,
                                              const std::function<void(const StageOutcome&)>& on_stage) {
  schedule.validate();
  std::vector<StageOutcome> done;
  done.reserve(schedule.stages.size());  // teacher points into this vector
  const model::BiEncoder<float>* teacher = &first_teacher;
  for (std::size_t i = 1; i < schedule.stages.size(); ++i) {
    StageSpec spec = schedule.stages[i];
    spec.mask_rate = schedule.mask_rate(i);
    model::EncoderConfig cfg = teacher->config();
    cfg.layers = spec.grade;
    const std::string label = "grade-" + std::to_string(spec.grade);
    model::BiEncoder<float> init;
    switch (spec.init) {
      case InitMode::LayerSelect: init = model::select_layers(*teacher, cfg); break;
      case InitMode::Copy:
        if (cfg.layers != teacher->config().layers)
          throw ConfigError("copy init needs equal depths (stage " + label + ")");
        init = *teacher;
        break;
      case InitMode::Fresh:
        init = model::BiEncoder<float>::init(cfg, derive_seed(options.seed, {label_tag(label), 0}));
        break;
    }
    done.push_back(train_stage(data, label, spec, schedule.strategy, teacher, std::move(init), options));
    if (on_stage) on_stage(done.back());
    teacher = &done.back().model;
  }
  return done;
}

}  // namespace pmd::train
