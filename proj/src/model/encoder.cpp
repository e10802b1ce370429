// SPDX-License-Identifier: Apache-2.0
#include "pmd/model/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "pmd/error.hpp"
#include "pmd/simd/kernels.hpp"

namespace pmd::model {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

template <class T>
void fill_truncated_normal(Tensor<T>& t, Rng& rng) {
  for (auto& x : t.values()) {
    double z;
    do z = rng.normal();
    while (std::abs(z) > 2.0);
    x = static_cast<T>(z * kInitStd);
  }
}

// y = x W + b over n rows.
template <class T>
void linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
  const std::size_t n = x.rows(), in = w.rows(), out = w.cols();
  y = Tensor<T>(n, out);
  for (std::size_t r = 0; r < n; ++r) std::copy(b.data(), b.data() + out, y.data() + r * out);
  simd::gemm_nn(n, out, in, x.data(), in, w.data(), out, y.data(), out, true);
}

// dW += x^T dy, db += colsum(dy), dx (+)= dy W^T.
template <class T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dw,
                     Tensor<T>& db, Tensor<T>& dx, bool accumulate_dx) {
  const std::size_t n = x.rows(), in = w.rows(), out = w.cols();
  simd::gemm_tn(in, out, n, x.data(), in, dy.data(), out, dw.data(), out, true);
  for (std::size_t r = 0; r < n; ++r) simd::axpy(out, T(1), dy.data() + r * out, db.data());
  if (!accumulate_dx) dx = Tensor<T>(n, in);
  simd::gemm_nt(n, in, out, dy.data(), out, w.data(), out, dx.data(), in, accumulate_dx);
}

template <class T>
void layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, Tensor<T>& y,
                Tensor<T>& xhat, Tensor<T>& rstd) {
  const std::size_t n = x.rows(), d = x.cols();
  y = Tensor<T>(n, d);
  xhat = Tensor<T>(n, d);
  rstd = Tensor<T>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const T* xr = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= double(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= double(d);
    const T rs = static_cast<T>(1.0 / std::sqrt(var + kLayerNormEps));
    rstd[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = static_cast<T>(xr[c] - mean) * rs;
      xhat(r, c) = h;
      y(r, c) = h * gain[c] + bias[c];
    }
  }
}

// dx = rstd * (g - mean(g) - xhat * mean(g * xhat)), g = dy * gain.
template <class T>
void layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, const Tensor<T>& rstd,
                         const Tensor<T>& gain, Tensor<T>& dgain, Tensor<T>& dbias, Tensor<T>& dx) {
  const std::size_t n = dy.rows(), d = dy.cols();
  dx = Tensor<T>(n, d);
  std::vector<T> g(d);
  for (std::size_t r = 0; r < n; ++r) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const T dyc = dy(r, c);
      dgain[c] += dyc * xhat(r, c);
      dbias[c] += dyc;
      g[c] = dyc * gain[c];
      sum_g += g[c];
      sum_gx += g[c] * xhat(r, c);
    }
    const T mg = static_cast<T>(sum_g / double(d)), mgx = static_cast<T>(sum_gx / double(d));
    for (std::size_t c = 0; c < d; ++c) dx(r, c) = rstd[r] * (g[c] - mg - xhat(r, c) * mgx);
  }
}

template <class T>
T gelu(T u) {
  return T(0.5) * u * (T(1) + std::erf(u * T(M_SQRT1_2)));
}

template <class T>
T gelu_grad(T u) {
  const T cdf = T(0.5) * (T(1) + std::erf(u * T(M_SQRT1_2)));
  const T pdf = std::exp(T(-0.5) * u * u) * T(0.3989422804014327);
  return cdf + u * pdf;
}

template <class T>
void dropout(Tensor<T>& x, Tensor<T>& mask, double rate, bool active, Rng* rng) {
  if (!active || rate == 0.0) {
    mask = Tensor<T>();
    return;
  }
  mask = Tensor<T>(x.rows(), x.cols());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->uniform() < rate ? T(0) : keep_scale;
    x[i] *= mask[i];
  }
}

template <class T>
void apply_mask_inplace(Tensor<T>& g, const Tensor<T>& mask) {
  if (mask.size() == 0) return;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
}

template <class T>
void pool(const Tensor<T>& h, const std::vector<std::size_t>& offsets, Pooling mode,
          Tensor<T>& out) {
  const std::size_t b = offsets.size() - 1, d = h.cols();
  out = Tensor<T>(b, d);
  for (std::size_t s = 0; s < b; ++s) {
    if (mode == Pooling::Cls) {
      std::copy_n(h.data() + offsets[s] * d, d, out.data() + s * d);
      continue;
    }
    const std::size_t n = offsets[s + 1] - offsets[s];
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) acc += h(r, c);
      out(s, c) = static_cast<T>(acc / double(n));
    }
  }
}

// Spreads a pooled-output gradient back over the rows it was pooled from.
template <class T>
void pool_backward(const Tensor<T>& dpooled, const std::vector<std::size_t>& offsets, Pooling mode,
                   Tensor<T>& dh) {
  const std::size_t b = offsets.size() - 1, d = dh.cols();
  for (std::size_t s = 0; s < b; ++s) {
    if (mode == Pooling::Cls) {
      simd::axpy(d, T(1), dpooled.data() + s * d, dh.data() + offsets[s] * d);
      continue;
    }
    const T scale = T(1) / static_cast<T>(offsets[s + 1] - offsets[s]);
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
      simd::axpy(d, scale, dpooled.data() + s * d, dh.data() + r * d);
  }
}

template <class T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (const T v : t.values())
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite gradient in ") + what);
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  if (src.size() == 0) return;
  simd::axpy(dst.size(), T(1), src.data(), dst.data());
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1 || vocab_size < 1 || max_len < 1)
    throw ConfigError("encoder dimensions must all be >= 1");
  if (hidden % heads != 0)
    throw ConfigError("hidden width " + std::to_string(hidden) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

template <class T>
EncoderParams<T> EncoderParams<T>::zeros(const EncoderConfig& c) {
  c.validate();
  EncoderParams p;
  p.config = c;
  const std::size_t d = c.hidden, f = c.ffn;
  p.token_embedding = Tensor<T>(c.vocab_size, d);
  p.position_embedding = Tensor<T>(c.max_len, d);
  p.emb_ln_gain = Tensor<T>(d);
  p.emb_ln_bias = Tensor<T>(d);
  p.layers.resize(c.layers);
  for (auto& l : p.layers) {
    l.wq = Tensor<T>(d, d); l.bq = Tensor<T>(d);
    l.wk = Tensor<T>(d, d); l.bk = Tensor<T>(d);
    l.wv = Tensor<T>(d, d); l.bv = Tensor<T>(d);
    l.wo = Tensor<T>(d, d); l.bo = Tensor<T>(d);
    l.ln1_gain = Tensor<T>(d); l.ln1_bias = Tensor<T>(d);
    l.w1 = Tensor<T>(d, f); l.b1 = Tensor<T>(f);
    l.w2 = Tensor<T>(f, d); l.b2 = Tensor<T>(d);
    l.ln2_gain = Tensor<T>(d); l.ln2_bias = Tensor<T>(d);
  }
  return p;
}

template <class T>
std::size_t EncoderParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <class T>
EncoderParams<T> init_params(const EncoderConfig& config, std::uint64_t seed) {
  auto p = EncoderParams<T>::zeros(config);
  Rng rng(derive_seed(seed, {0x1417}));
  p.visit([&](const std::string& name, Tensor<T>& t) {
    if (name.find("gain") != std::string::npos)
      t.fill(T(1));
    else if (t.rank() == 2)
      fill_truncated_normal(t, rng);
  });
  return p;
}

std::size_t count_params(const EncoderConfig& c) {
  c.validate();
  const std::size_t d = c.hidden, ff = c.ffn;
  const std::size_t per_layer = 4 * (d * d + d) + (d * ff + ff) + (ff * d + d) + 4 * d;
  return c.vocab_size * d + c.max_len * d + 2 * d + c.layers * per_layer;
}

std::vector<std::size_t> layer_map(std::size_t teacher_layers, std::size_t student_layers) {
  if (student_layers == 0 || student_layers > teacher_layers)
    throw ConfigError("student depth " + std::to_string(student_layers) +
                      " must be in [1, teacher depth " + std::to_string(teacher_layers) + "]");
  std::vector<std::size_t> map(student_layers);
  for (std::size_t j = 0; j < student_layers; ++j)
    map[j] = ((j + 1) * teacher_layers + student_layers - 1) / student_layers - 1;
  return map;
}

template <class T>
EncoderParams<T> select_layers(const EncoderParams<T>& teacher, const EncoderConfig& student) {
  const auto& tc = teacher.config;
  if (student.hidden != tc.hidden || student.heads != tc.heads || student.ffn != tc.ffn ||
      student.vocab_size != tc.vocab_size || student.max_len != tc.max_len)
    throw ConfigError("layer selection requires matching widths; width compression is unsupported");
  const auto map = layer_map(tc.layers, student.layers);
  EncoderParams<T> s;
  s.config = student;
  s.token_embedding = teacher.token_embedding;
  s.position_embedding = teacher.position_embedding;
  s.emb_ln_gain = teacher.emb_ln_gain;
  s.emb_ln_bias = teacher.emb_ln_bias;
  for (std::size_t t : map) s.layers.push_back(teacher.layers[t]);
  return s;
}

template <class T>
EncoderOutput<T> encode(const EncoderParams<T>& params, std::span<const text::TokenSequence> batch,
                        const ForwardOptions& options, EncoderTrace<T>* trace_out) {
  const auto& cfg = params.config;
  const std::size_t d = cfg.hidden, heads = cfg.heads, dh = d / heads;
  const bool drop = options.train && cfg.dropout > 0.0;
  if (drop && options.dropout_rng == nullptr)
    throw ConfigError("training-mode dropout needs a random stream");
  if (options.feature_layer > params.layers.size())
    throw ConfigError("feature layer " + std::to_string(options.feature_layer) + " exceeds depth " +
                      std::to_string(params.layers.size()));

  EncoderTrace<T> tr;
  tr.feature_layer = options.feature_layer == 0 ? params.layers.size() : options.feature_layer;
  tr.offsets.push_back(0);
  for (const auto& seq : batch) {
    if (seq.ids.size() > cfg.max_len)
      throw DataError("sequence of length " + std::to_string(seq.ids.size()) +
                      " exceeds max_len " + std::to_string(cfg.max_len));
    const std::size_t n = seq.length();
    if (n == 0) throw DataError("empty sequence");
    for (std::size_t p = 0; p < n; ++p) {
      if (seq.ids[p] < 0 || static_cast<std::size_t>(seq.ids[p]) >= cfg.vocab_size)
        throw DataError("token id " + std::to_string(seq.ids[p]) + " outside vocabulary");
      tr.ids.push_back(seq.ids[p]);
      tr.positions.push_back(p);
    }
    tr.offsets.push_back(tr.ids.size());
  }
  const std::size_t rows = tr.ids.size();
  const std::size_t nseq = batch.size();

  Tensor<T> x0(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* te = params.token_embedding.data() + static_cast<std::size_t>(tr.ids[r]) * d;
    const T* pe = params.position_embedding.data() + tr.positions[r] * d;
    for (std::size_t c = 0; c < d; ++c) x0(r, c) = te[c] + pe[c];
  }
  Tensor<T> x;
  layer_norm(x0, params.emb_ln_gain, params.emb_ln_bias, x, tr.emb_hat, tr.emb_rstd);
  dropout(x, tr.emb_drop, cfg.dropout, drop, options.dropout_rng);

  EncoderOutput<T> out;
  const T scale = static_cast<T>(1.0 / std::sqrt(double(dh)));
  tr.layers.resize(params.layers.size());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& L = params.layers[li];
    auto& c = tr.layers[li];
    c.input = std::move(x);
    linear(c.input, L.wq, L.bq, c.q);
    linear(c.input, L.wk, L.bk, c.k);
    linear(c.input, L.wv, L.bv, c.v);
    c.ctx = Tensor<T>(rows, d);
    std::size_t probs_size = 0;
    for (std::size_t s = 0; s < nseq; ++s) {
      const std::size_t n = tr.offsets[s + 1] - tr.offsets[s];
      probs_size += heads * n * n;
    }
    c.probs.assign(probs_size, T(0));
    std::size_t po = 0;
    for (std::size_t s = 0; s < nseq; ++s) {
      const std::size_t r0 = tr.offsets[s], n = tr.offsets[s + 1] - r0;
      for (std::size_t h = 0; h < heads; ++h) {
        T* P = c.probs.data() + po;
        po += n * n;
        simd::gemm_nt(n, n, dh, c.q.data() + r0 * d + h * dh, d, c.k.data() + r0 * d + h * dh, d,
                      P, n, false);
        for (std::size_t i = 0; i < n; ++i) {
          T* row = P + i * n;
          T mx = row[0] * scale;
          for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j] * scale);
          double sum = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] * scale - mx);
            sum += row[j];
          }
          const T inv = static_cast<T>(1.0 / sum);
          for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
        }
        simd::gemm_nn(n, dh, n, P, n, c.v.data() + r0 * d + h * dh, d,
                      c.ctx.data() + r0 * d + h * dh, d, false);
      }
    }
    Tensor<T> a;
    linear(c.ctx, L.wo, L.bo, a);
    dropout(a, c.attn_drop, cfg.dropout, drop, options.dropout_rng);
    add_into(a, c.input);
    layer_norm(a, L.ln1_gain, L.ln1_bias, c.h1, c.h1_hat, c.h1_rstd);

    linear(c.h1, L.w1, L.b1, c.u);
    c.g = Tensor<T>(c.u.rows(), c.u.cols());
    for (std::size_t i = 0; i < c.u.size(); ++i) c.g[i] = gelu(c.u[i]);
    Tensor<T> f;
    linear(c.g, L.w2, L.b2, f);
    dropout(f, c.ffn_drop, cfg.dropout, drop, options.dropout_rng);
    add_into(f, c.h1);
    layer_norm(f, L.ln2_gain, L.ln2_bias, x, c.h2_hat, c.h2_rstd);

    if (options.keep_layer_pooled) {
      out.layer_pooled.emplace_back();
      pool(x, tr.offsets, cfg.pooling, out.layer_pooled.back());
    }
    if (li + 1 == tr.feature_layer && li + 1 < params.layers.size()) out.features = x;
  }

  out.offsets = tr.offsets;
  pool(x, tr.offsets, cfg.pooling, out.pooled);
  if (tr.feature_layer == params.layers.size()) out.features = x;
  if (trace_out) {
    tr.output = std::move(x);
    *trace_out = std::move(tr);
  }
  return out;
}

template <class T>
void backward(const EncoderParams<T>& params, const EncoderTrace<T>& tr, const OutputGrad<T>& grad,
              EncoderParams<T>& grads) {
  const auto& cfg = params.config;
  const std::size_t d = cfg.hidden, heads = cfg.heads, dh = d / heads;
  const std::size_t rows = tr.ids.size(), nseq = tr.offsets.size() - 1;
  const T scale = static_cast<T>(1.0 / std::sqrt(double(dh)));

  check_finite(grad.features, "encoder features");
  check_finite(grad.pooled, "pooled embedding");
  for (const auto& g : grad.layer_pooled) check_finite(g, "layer pooled embedding");

  Tensor<T> dx(rows, d);
  if (tr.feature_layer == params.layers.size()) add_into(dx, grad.features);
  if (grad.pooled.size()) pool_backward(grad.pooled, tr.offsets, cfg.pooling, dx);

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& L = params.layers[li];
    auto& G = grads.layers[li];
    const auto& c = tr.layers[li];
    if (li < grad.layer_pooled.size() && grad.layer_pooled[li].size())
      pool_backward(grad.layer_pooled[li], tr.offsets, cfg.pooling, dx);
    if (li + 1 == tr.feature_layer && li + 1 < params.layers.size()) add_into(dx, grad.features);

    // out = LN2(h1 + drop(g W2 + b2))
    Tensor<T> dsum2;
    layer_norm_backward(dx, c.h2_hat, c.h2_rstd, L.ln2_gain, G.ln2_gain, G.ln2_bias, dsum2);
    Tensor<T> df = dsum2;
    apply_mask_inplace(df, c.ffn_drop);
    Tensor<T> dg;
    linear_backward(c.g, L.w2, df, G.w2, G.b2, dg, false);
    for (std::size_t i = 0; i < dg.size(); ++i) dg[i] *= gelu_grad(c.u[i]);
    Tensor<T> dh1 = std::move(dsum2);
    linear_backward(c.h1, L.w1, dg, G.w1, G.b1, dh1, true);

    // h1 = LN1(input + drop(ctx Wo + bo))
    Tensor<T> dsum1;
    layer_norm_backward(dh1, c.h1_hat, c.h1_rstd, L.ln1_gain, G.ln1_gain, G.ln1_bias, dsum1);
    Tensor<T> da = dsum1;
    apply_mask_inplace(da, c.attn_drop);
    Tensor<T> dctx;
    linear_backward(c.ctx, L.wo, da, G.wo, G.bo, dctx, false);

    Tensor<T> dq(rows, d), dk(rows, d), dv(rows, d);
    std::size_t po = 0;
    std::vector<T> dP;
    for (std::size_t s = 0; s < nseq; ++s) {
      const std::size_t r0 = tr.offsets[s], n = tr.offsets[s + 1] - r0;
      dP.resize(n * n);
      for (std::size_t h = 0; h < heads; ++h) {
        const T* P = c.probs.data() + po;
        po += n * n;
        const std::size_t col = r0 * d + h * dh;
        // ctx = P V
        simd::gemm_nt(n, n, dh, dctx.data() + col, d, c.v.data() + col, d, dP.data(), n, false);
        simd::gemm_tn(n, dh, n, P, n, dctx.data() + col, d, dv.data() + col, d, false);
        // softmax backward, then the 1/sqrt(dh) scale
        for (std::size_t i = 0; i < n; ++i) {
          T* drow = dP.data() + i * n;
          const T* prow = P + i * n;
          double dotp = 0.0;
          for (std::size_t j = 0; j < n; ++j) dotp += drow[j] * prow[j];
          const T dt = static_cast<T>(dotp);
          for (std::size_t j = 0; j < n; ++j) drow[j] = prow[j] * (drow[j] - dt) * scale;
        }
        // scores = Q K^T
        simd::gemm_nn(n, dh, n, dP.data(), n, c.k.data() + col, d, dq.data() + col, d, false);
        simd::gemm_tn(n, dh, n, dP.data(), n, c.q.data() + col, d, dk.data() + col, d, false);
      }
    }
    Tensor<T> dinput = std::move(dsum1);
    linear_backward(c.input, L.wq, dq, G.wq, G.bq, dinput, true);
    linear_backward(c.input, L.wk, dk, G.wk, G.bk, dinput, true);
    linear_backward(c.input, L.wv, dv, G.wv, G.bv, dinput, true);
    dx = std::move(dinput);
  }

  apply_mask_inplace(dx, tr.emb_drop);
  Tensor<T> dx0;
  layer_norm_backward(dx, tr.emb_hat, tr.emb_rstd, params.emb_ln_gain, grads.emb_ln_gain,
                      grads.emb_ln_bias, dx0);
  for (std::size_t r = 0; r < rows; ++r) {
    simd::axpy(d, T(1), dx0.data() + r * d,
               grads.token_embedding.data() + static_cast<std::size_t>(tr.ids[r]) * d);
    simd::axpy(d, T(1), dx0.data() + r * d, grads.position_embedding.data() + tr.positions[r] * d);
  }
}

#define PMD_INSTANTIATE(T)                                                                       \
  template struct EncoderParams<T>;                                                              \
  template EncoderParams<T> init_params<T>(const EncoderConfig&, std::uint64_t);                 \
  template EncoderParams<T> select_layers<T>(const EncoderParams<T>&, const EncoderConfig&);     \
  template EncoderOutput<T> encode<T>(const EncoderParams<T>&, std::span<const text::TokenSequence>, \
                                      const ForwardOptions&, EncoderTrace<T>*);                  \
  template void backward<T>(const EncoderParams<T>&, const EncoderTrace<T>&, const OutputGrad<T>&, \
                            EncoderParams<T>&);

PMD_INSTANTIATE(float)
PMD_INSTANTIATE(double)

}  // namespace pmd::model
