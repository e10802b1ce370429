// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pmd/kg/graph.hpp"
#include "pmd/text/vocab.hpp"

namespace pmd::text {

/// Fixed-length encoder input. Real tokens form a prefix; the rest is PAD.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> attention;  // 1 for real tokens, 0 for PAD
  std::vector<std::uint8_t> maskable;   // 1 for tokens other than CLS/SEP/PAD

  std::size_t max_len() const { return ids.size(); }
  /// Number of real (non-PAD) tokens.
  std::size_t length() const;

  bool operator==(const TokenSequence&) const = default;
};

/// Tokenizes every entity and relation once and lays out encoder inputs.
class SequenceBuilder {
 public:
  /// Throws ConfigError when max_len < 8.
  SequenceBuilder(const kg::KnowledgeGraph& graph, const Vocabulary& vocab, std::size_t max_len);

  /// CLS, head name, head description, SEP, relation, SEP, PAD...
  /// The description is truncated first.
  TokenSequence hr(kg::EntityId head, kg::RelationId relation) const;
  /// CLS, name, description, SEP, PAD...
  TokenSequence tail(kg::EntityId entity) const;

  std::size_t max_len() const { return max_len_; }

 private:
  struct EntityTokens {
    std::vector<TokenId> name;
    std::vector<TokenId> description;
  };
  std::vector<EntityTokens> entities_;
  std::vector<std::vector<TokenId>> relations_;
  std::size_t max_len_;
};

TokenSequence build_hr_sequence(const kg::KnowledgeGraph& graph, kg::EntityId head,
                                kg::RelationId relation, const Vocabulary& vocab,
                                std::size_t max_len);
TokenSequence build_tail_sequence(const kg::KnowledgeGraph& graph, kg::EntityId tail,
                                  const Vocabulary& vocab, std::size_t max_len);

}  // namespace pmd::text
