// SPDX-License-Identifier: Apache-2.0
#include "pmd/text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "pmd/error.hpp"

namespace pmd::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : {"[CLS]", "[SEP]", "[PAD]", "[MASK]", "[UNK]"}) add(s);
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_corpus(std::span<const std::string> texts, std::size_t min_freq,
                                   std::size_t max_size) {
  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) {
      ++freq[tok];
      ++total;
    }
  if (total == 0) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq)
    if (n >= std::max<std::size_t>(min_freq, 1)) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (auto& [tok, n] : kept) {
    if (max_size != 0 && v.size() >= max_size) break;
    if (v.index_.contains(tok)) continue;  // a corpus token spelled like a special
    v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::build(const kg::KnowledgeGraph& graph, std::size_t min_freq,
                             std::size_t max_size) {
  std::vector<std::string> corpus;
  corpus.reserve(2 * graph.entities.size() + graph.relations.size());
  for (const auto& e : graph.entities) {
    corpus.push_back(e.name);
    corpus.push_back(e.description);
  }
  for (const auto& r : graph.relations) corpus.push_back(r.name);
  return from_corpus(corpus, min_freq, max_size);
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::string_view Vocabulary::token(TokenId id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& tok : tokenize(text)) out.push_back(id(tok));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = kNumSpecial; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || v.index_.contains(line))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty or duplicate token");
    v.add(line);
  }
  return v;
}

}  // namespace pmd::text
