// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pmd/rng.hpp"
#include "pmd/text/sequence.hpp"

namespace pmd::text {

/// Encoder inputs for one training step after masking. The same instance is
/// fed to the teacher and the student so both see identical MASK positions.
struct MaskedBatch {
  std::vector<TokenSequence> hr;
  std::vector<TokenSequence> tail;
  /// Per sequence, the positions replaced by MASK (ascending).
  std::vector<std::vector<std::uint32_t>> hr_masked;
  std::vector<std::vector<std::uint32_t>> tail_masked;
  double rate = 0.0;

  std::size_t masked_count() const;
};

/// Replaces each maskable token independently with probability rate. One
/// uniform draw per maskable token, hr sequences first, then tails (only
/// when mask_tail is set). Throws ConfigError when rate is outside [0, 1].
MaskedBatch apply_mask(std::vector<TokenSequence> hr, std::vector<TokenSequence> tail,
                       double rate, Rng& rng, bool mask_tail = true);

}  // namespace pmd::text
