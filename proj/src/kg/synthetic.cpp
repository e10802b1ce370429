// SPDX-License-Identifier: Apache-2.0
#include "pmd/kg/synthetic.hpp"

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmd/error.hpp"
#include "pmd/rng.hpp"

namespace pmd::kg {
namespace {

constexpr std::array<const char*, 12> kHues = {"red",    "orange", "amber", "yellow",
                                               "green",  "teal",   "cyan",  "blue",
                                               "indigo", "violet", "pink",  "brown"};
constexpr std::array<const char*, 12> kShapes = {"cube", "sphere", "cone",  "ring",
                                                 "prism", "disk",  "star",  "arch",
                                                 "helix", "wedge", "torus", "spire"};

struct Shift {
  const char* id;
  int dhue;
  int dshape;
};
constexpr std::array<Shift, 8> kRelations = {{
    {"hue_step", 1, 0},
    {"shape_step", 0, 1},
    {"hue_mirror", 5, 0},
    {"shape_mirror", 0, 5},
    {"diagonal_step", 1, 1},
    {"hue_leap", 3, 0},
    {"knight_jump", 2, 7},
    {"far_drift", 4, 3},
}};

std::string pseudo_word(int index) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::string w;
  int x = index + 31;
  for (int syl = 0; syl < 3; ++syl) {
    w += kOnsets[x % 14];
    x /= 14;
    w += kVowels[(index * 7 + syl * 3) % 5];
  }
  return w;
}

}  // namespace

void write_synthetic_kg(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  if (spec.hues < 2 || spec.hues > static_cast<int>(kHues.size()) || spec.shapes < 2 ||
      spec.shapes > static_cast<int>(kShapes.size()))
    throw ConfigError("synthetic palette size out of range");
  std::filesystem::create_directories(dir);

  const int n = spec.hues * spec.shapes;
  auto ident = [](int e) {
    std::string s = std::to_string(e);
    return "E" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
  };

  nlohmann::ordered_json desc;
  for (int e = 0; e < n; ++e) {
    const int hue = e / spec.shapes, shape = e % spec.shapes;
    desc["entities"][ident(e)] = {
        {"name", pseudo_word(e)},
        {"description", std::string("a ") + kHues[hue] + " " + kShapes[shape]}};
  }
  for (const auto& r : kRelations) {
    std::string name = r.id;
    for (auto& c : name)
      if (c == '_') c = ' ';
    desc["relations"][r.id] = {{"name", name}};
  }
  std::ofstream(dir / "descriptions.json", std::ios::binary) << desc.dump(1) << '\n';

  struct Row {
    int h, r, t;
  };
  std::vector<Row> rows;
  for (int e = 0; e < n; ++e) {
    const int hue = e / spec.shapes, shape = e % spec.shapes;
    for (int r = 0; r < static_cast<int>(kRelations.size()); ++r) {
      const int th = (hue + kRelations[r].dhue) % spec.hues;
      const int ts = (shape + kRelations[r].dshape) % spec.shapes;
      rows.push_back({e, r, th * spec.shapes + ts});
    }
  }
  Rng rng(spec.seed);
  rng.shuffle(rows.begin(), rows.end());
  const auto n_valid = static_cast<std::size_t>(spec.valid_fraction * rows.size());
  const auto n_test = static_cast<std::size_t>(spec.test_fraction * rows.size());

  std::ofstream valid(dir / "valid.tsv", std::ios::binary), test(dir / "test.tsv", std::ios::binary),
      train(dir / "train.tsv", std::ios::binary);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ofstream& out = i < n_valid ? valid : i < n_valid + n_test ? test : train;
    out << ident(rows[i].h) << '\t' << kRelations[rows[i].r].id << '\t' << ident(rows[i].t) << '\n';
  }
}

}  // namespace pmd::kg
