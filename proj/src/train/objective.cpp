// SPDX-License-Identifier: Apache-2.0
#include "pmd/train/objective.hpp"

#include <cmath>

#include "pmd/error.hpp"
#include "pmd/scoring/scoring.hpp"

namespace pmd::train {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Pmd: return "pmd";
    case Strategy::NoMgfd: return "no-mgfd";
    case Strategy::Lkd: return "lkd";
    case Strategy::Pkd: return "pkd";
    case Strategy::None: return "none";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::Pmd, Strategy::NoMgfd, Strategy::Lkd, Strategy::Pkd, Strategy::None})
    if (name == strategy_name(s)) return s;
  throw ConfigError("unknown strategy '" + name + "' (expected pmd, no-mgfd, lkd, pkd or none)");
}

bool strategy_masks(Strategy s) { return s == Strategy::Pmd; }

distill::DistillWeights effective_weights(const ObjectiveConfig& cfg, double mask_rate) {
  distill::DistillWeights w = cfg.weights;
  switch (cfg.strategy) {
    case Strategy::None: w = {0.0, 0.0}; break;
    case Strategy::Pmd:
      if (mask_rate == 0.0) w.beta = 0.0;
      break;
    case Strategy::NoMgfd:
    case Strategy::Lkd: w.beta = 0.0; break;
    case Strategy::Pkd: break;
  }
  distill::validate(w);
  return w;
}

namespace {

template <class T>
void scale_into(Tensor<T>& dst, const Tensor<T>& src, double c) {
  if (dst.size() == 0) dst = Tensor<T>(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += static_cast<T>(c * double(src[i]));
}

}  // namespace

template <class T>
StepLosses compute_step(const model::BiEncoder<T>& student, const model::BiEncoder<T>* teacher,
                        const StepBatch& batch, const ObjectiveConfig& cfg,
                        const model::ForwardOptions& student_opts, model::BiEncoder<T>* grads) {
  const auto w = effective_weights(cfg, batch.inputs.rate);
  const bool distilling = cfg.strategy != Strategy::None;
  if (distilling && teacher == nullptr)
    throw ConfigError(std::string("strategy ") + strategy_name(cfg.strategy) + " needs a teacher");
  const bool pkd = cfg.strategy == Strategy::Pkd;
  const bool mgfd = cfg.strategy == Strategy::Pmd;
  const bool logits = cfg.strategy == Strategy::Lkd || pkd;

  model::ForwardOptions sopt = student_opts;
  sopt.keep_layer_pooled = pkd;
  sopt.feature_layer = cfg.feature_layer;
  model::EncoderTrace<T> tr_hr, tr_tail;
  const auto s_hr = model::encode(student.hr, std::span(batch.inputs.hr), sopt, grads ? &tr_hr : nullptr);
  const auto s_tail =
      model::encode(student.tail, std::span(batch.inputs.tail), sopt, grads ? &tr_tail : nullptr);
  const auto S = scoring::score_matrix(s_hr.pooled, s_tail.pooled, cfg.tau);

  StepLosses out;
  out.alpha = w.alpha;
  out.beta = w.beta;
  Tensor<T> d_ce;
  out.ce = scoring::cross_entropy_loss(S, std::span(batch.labels), grads ? &d_ce : nullptr);

  Tensor<T> d_global;
  std::vector<Tensor<T>> d_local_hr, d_local_tail;  // packed features (mgfd) or layer pooled (pkd)
  if (distilling) {
    model::ForwardOptions topt;
    topt.keep_layer_pooled = pkd;
    if (cfg.feature_layer != 0)
      topt.feature_layer =
          model::layer_map(teacher->config().layers, student.config().layers)[cfg.feature_layer - 1] + 1;
    const auto t_hr = model::encode(teacher->hr, std::span(batch.inputs.hr), topt);
    const auto t_tail = model::encode(teacher->tail, std::span(batch.inputs.tail), topt);
    const auto Tm = scoring::score_matrix(t_hr.pooled, t_tail.pooled, cfg.tau);
    out.global_term = logits ? distill::lkd_loss(S, Tm, cfg.lkd_temperature, grads ? &d_global : nullptr)
                             : distill::score_distill_loss(S, Tm, cfg.diagonal_score,
                                                           grads ? &d_global : nullptr);
    if (mgfd) {
      const distill::TowerFeatures<T> towers[2] = {{&s_hr, &t_hr, &batch.inputs.hr_masked},
                                                   {&s_tail, &t_tail, &batch.inputs.tail_masked}};
      std::vector<Tensor<T>> g;
      const auto f = distill::mgfd_loss<T>(towers, grads ? &g : nullptr);
      out.local_term = f.value;
      out.local_active = f.active;
      if (grads) {
        d_local_hr.push_back(std::move(g[0]));
        d_local_tail.push_back(std::move(g[1]));
      }
    } else if (pkd) {
      const auto map = model::layer_map(teacher->config().layers, student.config().layers);
      const double a = distill::pkd_loss<T>(s_hr.layer_pooled, t_hr.layer_pooled, map,
                                            grads ? &d_local_hr : nullptr);
      const double b = distill::pkd_loss<T>(s_tail.layer_pooled, t_tail.layer_pooled, map,
                                            grads ? &d_local_tail : nullptr);
      out.local_term = 0.5 * (a + b);
      out.local_active = true;
      for (auto& t : d_local_hr) for (auto& v : t.values()) v *= T(0.5);
      for (auto& t : d_local_tail) for (auto& v : t.values()) v *= T(0.5);
    }
  }
  out.local_contribution = w.beta * out.local_term;
  out.total = distill::combined_loss(out.ce, out.global_term, out.local_term, w);
  if (!std::isfinite(out.total)) throw NumericError("non-finite training loss");
  if (!grads) return out;

  const double c_ce = 1.0 - w.alpha - w.beta;
  Tensor<T> d_raw;
  scale_into(d_raw, d_ce, c_ce);
  if (w.alpha != 0.0 && d_global.size()) scale_into(d_raw, d_global, w.alpha);

  model::OutputGrad<T> g_hr, g_tail;
  scoring::score_matrix_backward(s_hr.pooled, s_tail.pooled, S, d_raw, g_hr.pooled, g_tail.pooled);
  if (w.beta != 0.0) {
    if (mgfd) {
      scale_into(g_hr.features, d_local_hr[0], w.beta);
      scale_into(g_tail.features, d_local_tail[0], w.beta);
    } else if (pkd) {
      for (auto& t : d_local_hr) {
        g_hr.layer_pooled.emplace_back();
        scale_into(g_hr.layer_pooled.back(), t, w.beta);
      }
      for (auto& t : d_local_tail) {
        g_tail.layer_pooled.emplace_back();
        scale_into(g_tail.layer_pooled.back(), t, w.beta);
      }
    }
  }
  model::backward(student.hr, tr_hr, g_hr, grads->hr);
  model::backward(student.tail, tr_tail, g_tail, grads->tail);
  return out;
}

template StepLosses compute_step<float>(const model::BiEncoder<float>&, const model::BiEncoder<float>*,
                                        const StepBatch&, const ObjectiveConfig&,
                                        const model::ForwardOptions&, model::BiEncoder<float>*);
template StepLosses compute_step<double>(const model::BiEncoder<double>&,
                                         const model::BiEncoder<double>*, const StepBatch&,
                                         const ObjectiveConfig&, const model::ForwardOptions&,
                                         model::BiEncoder<double>*);

}  // namespace pmd::train
