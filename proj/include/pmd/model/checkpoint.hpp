// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout (all integers little-endian):
//   "PMDC" | u32 version | u64 n | n bytes UTF-8 JSON (encoder config + metadata)
//   then per tensor: u64 name_len | name | u64 rank | rank x u64 dims | f32 payload
#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "pmd/model/bi_encoder.hpp"

namespace pmd::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json config_to_json(const EncoderConfig& c);
/// Throws ConfigError on missing or unknown fields.
EncoderConfig config_from_json(const nlohmann::json& j);

struct Checkpoint {
  BiEncoder<float> model;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws DataError("not a PMDC checkpoint") on bad magic, DataError on a
/// version mismatch, truncation, or tensors that disagree with the config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the serialized tensor payloads, for immutability checks.
std::uint64_t parameter_hash(const BiEncoder<float>& model);

}  // namespace pmd::model
