// SPDX-License-Identifier: Apache-2.0
#include "pmd/text/masking.hpp"

#include <string>

#include "pmd/error.hpp"

namespace pmd::text {
namespace {

void mask_all(std::vector<TokenSequence>& seqs, std::vector<std::vector<std::uint32_t>>& positions,
              double rate, Rng& rng, bool active) {
  positions.assign(seqs.size(), {});
  if (!active || rate == 0.0) return;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    auto& seq = seqs[s];
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      if (!seq.maskable[i]) continue;
      if (rng.uniform() < rate) {
        seq.ids[i] = kMask;
        positions[s].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }
}

}  // namespace

std::size_t MaskedBatch::masked_count() const {
  std::size_t n = 0;
  for (const auto& p : hr_masked) n += p.size();
  for (const auto& p : tail_masked) n += p.size();
  return n;
}

MaskedBatch apply_mask(std::vector<TokenSequence> hr, std::vector<TokenSequence> tail,
                       double rate, Rng& rng, bool mask_tail) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw ConfigError("mask rate must lie in [0, 1], got " + std::to_string(rate));
  MaskedBatch b;
  b.rate = rate;
  b.hr = std::move(hr);
  b.tail = std::move(tail);
  mask_all(b.hr, b.hr_masked, rate, rng, true);
  mask_all(b.tail, b.tail_masked, rate, rng, mask_tail);
  return b;
}

}  // namespace pmd::text
