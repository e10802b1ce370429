// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pmd::testing {
namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  Rng rng(derive_seed(reinterpret_cast<std::uintptr_t>(this), {++counter}));
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto p = fs::temp_directory_path() / ("pmd-test-" + std::to_string(rng.next_u64() % 100000000));
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<text::TokenSequence> random_sequences(Rng& rng, std::size_t count, std::size_t vocab_size,
                                                  std::size_t max_len, std::size_t min_len,
                                                  std::size_t max_real) {
  std::vector<text::TokenSequence> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = min_len + rng.below(max_real - min_len + 1);
    text::TokenSequence s;
    for (std::size_t p = 0; p < max_len; ++p) {
      const bool real = p < n;
      text::TokenId id = text::kPad;
      if (real)
        id = p == 0 ? text::kCls
             : p + 1 == n
                 ? text::kSep
                 : static_cast<text::TokenId>(text::kNumSpecial + rng.below(vocab_size - text::kNumSpecial));
      s.ids.push_back(id);
      s.attention.push_back(real ? 1 : 0);
      s.maskable.push_back(real && p > 0 && p + 1 < n ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_toy_graph(const ToyGraphSpec& spec, const fs::path& dir) {
  static const char* words[] = {"amber", "basalt", "cedar", "dune", "ember", "fjord", "glade", "heath",
                                "inlet", "jade", "knoll", "loch", "marsh", "nook", "oasis", "pine"};
  Rng rng(spec.seed);
  fs::create_directories(dir);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  auto draw = [&](std::size_t limit_entities) {
    for (;;) {
      const std::size_t h = rng.below(limit_entities), r = rng.below(spec.relations),
                        t = rng.below(limit_entities);
      if (h != t && seen.insert({h, r, t}).second) return std::tuple{h, r, t};
    }
  };
  auto emit = [&](const fs::path& path, std::size_t n, bool first) {
    std::ostringstream out;
    // the first train lines cover every entity so valid/test never see new ones
    std::size_t i = 0;
    if (first)
      for (; i < spec.entities && i < n; ++i) {
        const std::size_t t = (i + 1) % spec.entities, r = i % spec.relations;
        seen.insert({i, r, t});
        out << "ent" << i << "\trel" << r << "\tent" << t << "\n";
      }
    for (; i < n; ++i) {
      const auto [h, r, t] = draw(spec.entities);
      out << "ent" << h << "\trel" << r << "\tent" << t << "\n";
    }
    write_file(path, out.str());
  };
  emit(dir / "train.tsv", spec.train, true);
  emit(dir / "valid.tsv", spec.valid, false);
  emit(dir / "test.tsv", spec.test, false);
  std::ostringstream desc;
  for (std::size_t e = 0; e < spec.entities; ++e)
    desc << "ent" << e << "\tent" << e << "\t" << words[rng.below(16)] << " " << words[rng.below(16)] << "\n";
  for (std::size_t r = 0; r < spec.relations; ++r) desc << "rel" << r << "\tlinked_" << words[r % 16] << "\n";
  write_file(dir / "descriptions.tsv", desc.str());
}

namespace {
kg::KnowledgeGraph load_toy(const ToyGraphSpec& spec) {
  TempDir dir;
  write_toy_graph(spec, dir.path());
  return kg::add_inverse_triples(kg::load_graph(toy_paths(dir.path())));
}
}  // namespace

ToyData::ToyData(const ToyGraphSpec& spec, std::size_t max_len)
    : graph(load_toy(spec)),
      vocab(text::Vocabulary::build(graph, 1, 0)),
      seqs(graph, vocab, max_len),
      filter(kg::build_filter_index(graph)) {}

kg::GraphPaths toy_paths(const fs::path& dir) {
  return {dir / "train.tsv", dir / "valid.tsv", dir / "test.tsv", dir / "descriptions.tsv"};
}

model::EncoderConfig tiny_config(std::size_t vocab_size, std::size_t layers, std::size_t hidden,
                                 std::size_t heads) {
  model::EncoderConfig c;
  c.layers = layers;
  c.hidden = hidden;
  c.heads = heads;
  c.ffn = 2 * hidden;
  c.vocab_size = vocab_size;
  c.max_len = 16;
  c.dropout = 0.1;
  return c;
}

}  // namespace pmd::testing
