// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmd/kg/graph.hpp"
#include "pmd/model/encoder.hpp"
#include "pmd/rng.hpp"
#include "pmd/text/sequence.hpp"
#include "pmd/text/vocab.hpp"
#include "pmd/train/pipeline.hpp"

namespace pmd::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

/// CLS, random body tokens, SEP, PAD... with lengths in [min_len, max_real].
std::vector<text::TokenSequence> random_sequences(Rng& rng, std::size_t count, std::size_t vocab_size,
                                                  std::size_t max_len, std::size_t min_len,
                                                  std::size_t max_real);

/// Random graph written as raw files (train/valid/test/descriptions) and
/// returned loaded and inverse-augmented. Valid/test only use entities seen
/// in train.
struct ToyGraphSpec {
  std::size_t entities = 50;
  std::size_t relations = 4;
  std::size_t train = 150;
  std::size_t valid = 20;
  std::size_t test = 20;
  std::uint64_t seed = 1;
};
void write_toy_graph(const ToyGraphSpec& spec, const std::filesystem::path& dir);
kg::GraphPaths toy_paths(const std::filesystem::path& dir);

/// A toy graph loaded in memory with everything training needs.
struct ToyData {
  explicit ToyData(const ToyGraphSpec& spec = {}, std::size_t max_len = 16);

  kg::KnowledgeGraph graph;  // inverse-augmented
  text::Vocabulary vocab;
  text::SequenceBuilder seqs;
  kg::FilterIndex filter;

  train::TrainingData data() const { return {&graph, &seqs, &filter}; }
};

model::EncoderConfig tiny_config(std::size_t vocab_size, std::size_t layers = 2, std::size_t hidden = 16,
                                 std::size_t heads = 2);

}  // namespace pmd::testing
