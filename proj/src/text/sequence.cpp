// SPDX-License-Identifier: Apache-2.0
#include "pmd/text/sequence.hpp"

#include <algorithm>

#include "pmd/error.hpp"

namespace pmd::text {
namespace {

class Layout {
 public:
  explicit Layout(std::size_t max_len) {
    seq_.ids.reserve(max_len);
    max_len_ = max_len;
  }
  void special(TokenId id) { push(id, false); }
  void words(const std::vector<TokenId>& ids, std::size_t keep) {
    for (std::size_t i = 0; i < keep; ++i) push(ids[i], true);
  }
  TokenSequence finish() {
    while (seq_.ids.size() < max_len_) {
      seq_.ids.push_back(kPad);
      seq_.attention.push_back(0);
      seq_.maskable.push_back(0);
    }
    return std::move(seq_);
  }

 private:
  void push(TokenId id, bool maskable) {
    seq_.ids.push_back(id);
    seq_.attention.push_back(1);
    seq_.maskable.push_back(maskable ? 1 : 0);
  }
  TokenSequence seq_;
  std::size_t max_len_;
};

}  // namespace

std::size_t TokenSequence::length() const {
  return static_cast<std::size_t>(std::count(attention.begin(), attention.end(), 1));
}

SequenceBuilder::SequenceBuilder(const kg::KnowledgeGraph& graph, const Vocabulary& vocab,
                                 std::size_t max_len)
    : max_len_(max_len) {
  if (max_len < 8) throw ConfigError("max_len must be at least 8, got " + std::to_string(max_len));
  entities_.reserve(graph.entities.size());
  for (const auto& e : graph.entities) {
    EntityTokens t{vocab.encode(e.name), vocab.encode(e.description)};
    // A description identical to the name adds nothing but length.
    if (e.description == e.name) t.description.clear();
    entities_.push_back(std::move(t));
  }
  for (const auto& r : graph.relations) relations_.push_back(vocab.encode(r.name));
}

TokenSequence SequenceBuilder::hr(kg::EntityId head, kg::RelationId relation) const {
  const auto& e = entities_.at(head);
  const auto& rel = relations_.at(relation);
  if (e.name.empty() && e.description.empty())
    throw DataError("entity " + std::to_string(head) + " has no text after tokenization");
  const std::size_t budget = max_len_ - 3;
  // Name and relation stay intact whenever they fit on their own; only a
  // pathological name/relation pair longer than the budget is cut.
  const std::size_t rel_keep = std::min(rel.size(), std::max(budget / 2, budget - std::min(e.name.size(), budget)));
  const std::size_t name_keep = std::min(e.name.size(), budget - rel_keep);
  const std::size_t desc_keep = std::min(e.description.size(), budget - rel_keep - name_keep);
  Layout l(max_len_);
  l.special(kCls);
  l.words(e.name, name_keep);
  l.words(e.description, desc_keep);
  l.special(kSep);
  l.words(rel, rel_keep);
  l.special(kSep);
  return l.finish();
}

TokenSequence SequenceBuilder::tail(kg::EntityId entity) const {
  const auto& e = entities_.at(entity);
  if (e.name.empty() && e.description.empty())
    throw DataError("entity " + std::to_string(entity) + " has no text after tokenization");
  const std::size_t budget = max_len_ - 2;
  const std::size_t name_keep = std::min(e.name.size(), budget);
  const std::size_t desc_keep = std::min(e.description.size(), budget - name_keep);
  Layout l(max_len_);
  l.special(kCls);
  l.words(e.name, name_keep);
  l.words(e.description, desc_keep);
  l.special(kSep);
  return l.finish();
}

TokenSequence build_hr_sequence(const kg::KnowledgeGraph& graph, kg::EntityId head,
                                kg::RelationId relation, const Vocabulary& vocab,
                                std::size_t max_len) {
  return SequenceBuilder(graph, vocab, max_len).hr(head, relation);
}

TokenSequence build_tail_sequence(const kg::KnowledgeGraph& graph, kg::EntityId tail,
                                  const Vocabulary& vocab, std::size_t max_len) {
  return SequenceBuilder(graph, vocab, max_len).tail(tail);
}

}  // namespace pmd::text
