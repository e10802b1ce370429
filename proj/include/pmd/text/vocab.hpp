// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pmd/kg/graph.hpp"

namespace pmd::text {

using TokenId = std::int32_t;

inline constexpr TokenId kCls = 0;
inline constexpr TokenId kSep = 1;
inline constexpr TokenId kPad = 2;
inline constexpr TokenId kMask = 3;
inline constexpr TokenId kUnk = 4;
inline constexpr std::size_t kNumSpecial = 5;

/// Lowercases ASCII letters and splits on whitespace; ASCII punctuation
/// characters become single-character tokens. Bytes >= 0x80 are kept as
/// word characters so UTF-8 text survives intact.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  /// Tokens with corpus frequency >= min_freq, ordered by descending
  /// frequency then lexicographically; max_size (0 = unlimited) caps the total
  /// size including the five specials. Throws DataError on an empty corpus.
  static Vocabulary from_corpus(std::span<const std::string> texts, std::size_t min_freq,
                                std::size_t max_size);
  /// Corpus = entity names and descriptions plus relation names.
  static Vocabulary build(const kg::KnowledgeGraph& graph, std::size_t min_freq,
                          std::size_t max_size);

  TokenId id(std::string_view token) const;
  std::string_view token(TokenId id) const;
  std::vector<TokenId> encode(std::string_view text) const;
  std::size_t size() const { return tokens_.size(); }

  /// One corpus token per line; line i holds id i + 5.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  Vocabulary();
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace pmd::text
