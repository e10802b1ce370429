// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

namespace pmd::kg {

/// A small knowledge graph whose facts are compositional in the entity text:
/// every entity is a (hue, shape) pair described in words, and every relation
/// shifts the hue and shape indices by a fixed offset (mod the palette size).
/// Held-out triples are therefore inferable from descriptions alone.
struct SyntheticSpec {
  int hues = 10;
  int shapes = 10;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 20240229;
};

/// Writes train.tsv, valid.tsv, test.tsv and descriptions.json into dir.
void write_synthetic_kg(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace pmd::kg
