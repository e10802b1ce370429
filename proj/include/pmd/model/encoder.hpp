// SPDX-License-Identifier: Apache-2.0
//
// One transformer encoder tower: token + position embeddings, embedding
// layer norm, then post-norm blocks (self-attention, GELU feed-forward).
// Sequences are processed at their real length; PAD positions carry no
// features and never influence real ones.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmd/rng.hpp"
#include "pmd/tensor.hpp"
#include "pmd/text/sequence.hpp"

namespace pmd::model {

enum class Pooling { Mean, Cls };

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  double dropout = 0.1;
  Pooling pooling = Pooling::Mean;

  /// Throws ConfigError unless all dimensions are >= 1, hidden % heads == 0
  /// and dropout lies in [0, 1).
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

template <class T>
struct LayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> ln2_gain, ln2_bias;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("wq", self.wq); f("bq", self.bq);
    f("wk", self.wk); f("bk", self.bk);
    f("wv", self.wv); f("bv", self.bv);
    f("wo", self.wo); f("bo", self.bo);
    f("ln1_gain", self.ln1_gain); f("ln1_bias", self.ln1_bias);
    f("w1", self.w1); f("b1", self.b1);
    f("w2", self.w2); f("b2", self.b2);
    f("ln2_gain", self.ln2_gain); f("ln2_bias", self.ln2_bias);
  }

  bool operator==(const LayerParams&) const = default;
};

template <class T>
struct EncoderParams {
  EncoderConfig config;
  Tensor<T> token_embedding;     // vocab x d
  Tensor<T> position_embedding;  // max_len x d
  Tensor<T> emb_ln_gain, emb_ln_bias;
  std::vector<LayerParams<T>> layers;

  /// Correctly shaped, all-zero parameters (also used as gradient buffers).
  static EncoderParams zeros(const EncoderConfig& config);

  /// Calls f(name, tensor) for every parameter in a fixed order.
  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

  std::size_t parameter_count() const;
  bool operator==(const EncoderParams&) const = default;

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    f(std::string("token_embedding"), self.token_embedding);
    f(std::string("position_embedding"), self.position_embedding);
    f(std::string("emb_ln_gain"), self.emb_ln_gain);
    f(std::string("emb_ln_bias"), self.emb_ln_bias);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layers." + std::to_string(l) + ".";
      LayerParams<T>::visit(self.layers[l], [&](const char* name, auto& t) { f(prefix + name, t); });
    }
  }
};

/// Weights ~ N(0, 0.02^2) truncated at two standard deviations, biases 0,
/// norm gains 1. Deterministic per (config, seed).
template <class T>
EncoderParams<T> init_params(const EncoderConfig& config, std::uint64_t seed);

/// vocab*d + max_len*d + 2d + L*[4(d^2+d) + (d*ff+ff) + (ff*d+d) + 4d]
std::size_t count_params(const EncoderConfig& config);

/// Teacher layer feeding student layer j: ceil((j+1) * L_T / L_S) - 1.
std::vector<std::size_t> layer_map(std::size_t teacher_layers, std::size_t student_layers);

/// Student built from a subset of teacher layers (uniform stride); embeddings
/// and norms copied. Throws ConfigError on width mismatch or L_S > L_T.
template <class T>
EncoderParams<T> select_layers(const EncoderParams<T>& teacher, const EncoderConfig& student);

/// Token features for a batch (final block unless ForwardOptions selects
/// another), packed: rows offsets[b]..offsets[b+1]
/// hold the real tokens of sequence b.
template <class T>
struct EncoderOutput {
  std::vector<std::size_t> offsets;
  Tensor<T> features;  // total real tokens x d
  Tensor<T> pooled;    // batch x d
  /// Pooled output of every layer (index l = after block l); filled only
  /// when ForwardOptions::keep_layer_pooled is set.
  std::vector<Tensor<T>> layer_pooled;

  std::size_t batch_size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t length(std::size_t b) const { return offsets[b + 1] - offsets[b]; }
  std::span<const T> token(std::size_t b, std::size_t pos) const {
    return features.row(offsets[b] + pos);
  }
};

struct ForwardOptions {
  bool train = false;           // enables dropout
  Rng* dropout_rng = nullptr;   // required when train && dropout > 0
  bool keep_layer_pooled = false;
  /// Block whose token states are returned as features (1-based); 0 means
  /// the last block.
  std::size_t feature_layer = 0;
};

/// Intermediate values kept for the backward pass.
template <class T>
struct EncoderTrace {
  struct Layer {
    Tensor<T> input, q, k, v, ctx, attn_drop, h1_hat, h1_rstd, h1, u, g, ffn_drop, h2_hat, h2_rstd;
    std::vector<T> probs;  // per sequence, per head: n x n
  };
  std::vector<text::TokenId> ids;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> offsets;
  Tensor<T> emb_hat, emb_rstd, emb_drop;
  std::vector<Layer> layers;
  std::size_t feature_layer = 0;  // resolved, 1-based
  Tensor<T> output;
};

/// Throws DataError when a sequence exceeds max_len or a token id is out of
/// vocabulary range, ConfigError when feature_layer exceeds the depth.
template <class T>
EncoderOutput<T> encode(const EncoderParams<T>& params, std::span<const text::TokenSequence> batch,
                        const ForwardOptions& options = {}, EncoderTrace<T>* trace = nullptr);

/// Loss gradients with respect to encoder outputs. Empty tensors mean zero.
template <class T>
struct OutputGrad {
  Tensor<T> features;                  // packed, like EncoderOutput::features
  Tensor<T> pooled;                    // batch x d
  std::vector<Tensor<T>> layer_pooled; // per layer, batch x d (may be empty)
};

/// Reverse-mode pass; accumulates into grads (shaped like params). Throws
/// NumericError on non-finite incoming gradients.
template <class T>
void backward(const EncoderParams<T>& params, const EncoderTrace<T>& trace,
              const OutputGrad<T>& grad, EncoderParams<T>& grads);

}  // namespace pmd::model
