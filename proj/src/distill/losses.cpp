// SPDX-License-Identifier: Apache-2.0
#include "pmd/distill/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmd/error.hpp"

namespace pmd::distill {

void validate(const DistillWeights& w) {
  if (!(w.alpha >= 0.0) || !(w.beta >= 0.0))
    throw ConfigError("distillation weights must be non-negative");
  if (w.alpha + w.beta > 1.0)
    throw ConfigError("alpha + beta must not exceed 1 (got " + std::to_string(w.alpha + w.beta) + ")");
}

double combined_loss(double ce, double score, double feature, const DistillWeights& w) {
  validate(w);
  return (1.0 - w.alpha - w.beta) * ce + w.alpha * score + w.beta * feature;
}

template <class T>
FeatureLoss mgfd_loss(std::span<const TowerFeatures<T>> towers, std::vector<Tensor<T>>* grads) {
  FeatureLoss out;
  std::size_t d = 0;
  for (const auto& t : towers) {
    if (!t.student || !t.teacher || !t.masked) throw ConfigError("mgfd_loss: incomplete tower");
    if (t.student->offsets != t.teacher->offsets)
      throw ConfigError("mgfd_loss: student and teacher token layouts differ");
    if (t.student->features.cols() != t.teacher->features.cols())
      throw ConfigError("mgfd_loss: student and teacher widths differ");
    if (t.masked->size() != t.student->batch_size())
      throw ConfigError("mgfd_loss: mask list does not match batch");
    d = t.student->features.cols();
    for (std::size_t b = 0; b < t.masked->size(); ++b)
      for (auto pos : (*t.masked)[b]) {
        if (pos >= t.student->length(b)) throw ConfigError("mgfd_loss: masked position out of range");
        ++out.positions;
      }
  }
  if (grads) {
    grads->clear();
    for (const auto& t : towers) grads->emplace_back(t.student->features.rows(), t.student->features.cols());
  }
  if (out.positions == 0) return out;
  out.active = true;
  const double scale = 1.0 / (double(out.positions) * double(d));
  double sum = 0.0;
  for (std::size_t ti = 0; ti < towers.size(); ++ti) {
    const auto& t = towers[ti];
    for (std::size_t b = 0; b < t.masked->size(); ++b) {
      for (auto pos : (*t.masked)[b]) {
        const std::size_t row = t.student->offsets[b] + pos;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = double(t.student->features(row, k)) - double(t.teacher->features(row, k));
          sum += diff * diff;
          if (grads) (*grads)[ti](row, k) = static_cast<T>(2.0 * diff * scale);
        }
      }
    }
  }
  out.value = sum * scale;
  return out;
}

template <class T>
double score_distill_loss(const scoring::ScoreMatrix<T>& student,
                          const scoring::ScoreMatrix<T>& teacher, bool diagonal_only,
                          Tensor<T>* d_student_raw) {
  if (student.raw.shape() != teacher.raw.shape())
    throw ConfigError("score_distill_loss: shape mismatch");
  const std::size_t r = student.rows(), c = student.cols();
  if (d_student_raw) *d_student_raw = Tensor<T>(r, c);
  const double count = diagonal_only ? double(std::min(r, c)) : double(r * c);
  double sum = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (diagonal_only && i != j) continue;
      const double diff = double(student.raw(i, j)) - double(teacher.raw(i, j));
      sum += diff * diff;
      if (d_student_raw) (*d_student_raw)(i, j) = static_cast<T>(2.0 * diff / count);
    }
  }
  return sum / count;
}

template <class T>
double lkd_loss(const scoring::ScoreMatrix<T>& student, const scoring::ScoreMatrix<T>& teacher,
                double temperature, Tensor<T>* d_student_raw) {
  if (student.raw.shape() != teacher.raw.shape()) throw ConfigError("lkd_loss: shape mismatch");
  if (!(temperature > 0.0)) throw ConfigError("lkd_loss: temperature must be positive");
  const std::size_t r = student.rows(), c = student.cols();
  if (d_student_raw) *d_student_raw = Tensor<T>(r, c);
  auto softmax = [&](const scoring::ScoreMatrix<T>& m, std::size_t i, std::vector<double>& p) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, m.scaled(i, j) / temperature);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (p[j] = std::exp(m.scaled(i, j) / temperature - mx));
    for (auto& v : p) v /= sum;
  };
  std::vector<double> ps(c), pt(c);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    softmax(student, i, ps);
    softmax(teacher, i, pt);
    for (std::size_t j = 0; j < c; ++j)
      if (pt[j] > 0.0) total += pt[j] * (std::log(pt[j]) - std::log(std::max(ps[j], 1e-300)));
    if (d_student_raw) {
      // d/dz_s of T^2 KL = T (p_s - p_t); z_s = raw / tau
      for (std::size_t j = 0; j < c; ++j)
        (*d_student_raw)(i, j) =
            static_cast<T>(temperature * (ps[j] - pt[j]) / (student.temperature * double(r)));
    }
  }
  return total * temperature * temperature / double(r);
}

template <class T>
double pkd_loss(std::span<const Tensor<T>> student_layers, std::span<const Tensor<T>> teacher_layers,
                std::span<const std::size_t> map, std::vector<Tensor<T>>* d_student_layers) {
  if (map.size() != student_layers.size()) throw ConfigError("pkd_loss: layer map size mismatch");
  if (d_student_layers) {
    d_student_layers->clear();
    for (const auto& s : student_layers) d_student_layers->emplace_back(s.rows(), s.cols());
  }
  if (map.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < map.size(); ++j) {
    if (map[j] >= teacher_layers.size()) throw ConfigError("pkd_loss: layer map out of range");
    const auto& s = student_layers[j];
    const auto& t = teacher_layers[map[j]];
    if (s.shape() != t.shape()) throw ConfigError("pkd_loss: shape mismatch");
    const std::size_t b = s.rows(), d = s.cols();
    const double scale = 1.0 / (double(map.size()) * double(b) * double(d));
    for (std::size_t i = 0; i < b; ++i) {
      const double ns = scoring::norm<T>(s.row(i)), nt = scoring::norm<T>(t.row(i));
      if (!(ns > 0.0) || !(nt > 0.0)) throw NumericError("pkd_loss: zero-norm layer state");
      double sq = 0.0, gdotu = 0.0;
      std::vector<double> diff(d);
      for (std::size_t k = 0; k < d; ++k) {
        diff[k] = double(s(i, k)) / ns - double(t(i, k)) / nt;
        sq += diff[k] * diff[k];
        gdotu += diff[k] * double(s(i, k)) / ns;
      }
      total += sq * scale;
      if (d_student_layers) {
        // d|u_hat - v|^2 / du = 2 (diff - (diff . u_hat) u_hat) / |u|
        auto& g = (*d_student_layers)[j];
        for (std::size_t k = 0; k < d; ++k)
          g(i, k) = static_cast<T>(scale * 2.0 * (diff[k] - gdotu * double(s(i, k)) / ns) / ns);
      }
    }
  }
  return total;
}

#define PMD_INSTANTIATE(T)                                                                         \
  template FeatureLoss mgfd_loss<T>(std::span<const TowerFeatures<T>>, std::vector<Tensor<T>>*);   \
  template double score_distill_loss<T>(const scoring::ScoreMatrix<T>&,                            \
                                        const scoring::ScoreMatrix<T>&, bool, Tensor<T>*);         \
  template double lkd_loss<T>(const scoring::ScoreMatrix<T>&, const scoring::ScoreMatrix<T>&,      \
                              double, Tensor<T>*);                                                 \
  template double pkd_loss<T>(std::span<const Tensor<T>>, std::span<const Tensor<T>>,              \
                              std::span<const std::size_t>, std::vector<Tensor<T>>*);

PMD_INSTANTIATE(float)
PMD_INSTANTIATE(double)

}  // namespace pmd::distill
