// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "pmd/model/encoder.hpp"

namespace pmd::model {

/// Two independent towers: one embeds (head, relation) text, the other
/// embeds tail-entity text. Both share one architecture.
template <class T>
struct BiEncoder {
  EncoderParams<T> hr;
  EncoderParams<T> tail;

  const EncoderConfig& config() const { return hr.config; }

  static BiEncoder init(const EncoderConfig& config, std::uint64_t seed);
  static BiEncoder zeros(const EncoderConfig& config);

  /// Parameters named "hr.<name>" / "tail.<name>".
  template <class F>
  void visit(F&& f) {
    hr.visit([&](const std::string& n, auto& t) { f("hr." + n, t); });
    tail.visit([&](const std::string& n, auto& t) { f("tail." + n, t); });
  }
  template <class F>
  void visit(F&& f) const {
    hr.visit([&](const std::string& n, const auto& t) { f("hr." + n, t); });
    tail.visit([&](const std::string& n, const auto& t) { f("tail." + n, t); });
  }

  std::size_t parameter_count() const { return hr.parameter_count() + tail.parameter_count(); }
  bool operator==(const BiEncoder&) const = default;
};

/// Closed-form size of a bi-encoder. With shared_token_embeddings the
/// vocab x d table is counted once.
std::size_t count_bi_encoder_params(const EncoderConfig& config,
                                    bool shared_token_embeddings = false);

template <class T>
BiEncoder<T> select_layers(const BiEncoder<T>& teacher, const EncoderConfig& student) {
  return {select_layers(teacher.hr, student), select_layers(teacher.tail, student)};
}

/// Element-wise conversion between precisions (used by gradient checks).
template <class To, class From>
BiEncoder<To> convert(const BiEncoder<From>& src);

}  // namespace pmd::model
