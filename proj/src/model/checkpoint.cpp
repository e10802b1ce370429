// SPDX-License-Identifier: Apache-2.0
#include "pmd/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include "pmd/error.hpp"

namespace pmd::model {
namespace {

using nlohmann::json;

template <class U>
void put_le(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U)))
    throw DataError(path.string() + ": truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

void put_floats(std::ostream& out, const Tensor<float>& t) {
  for (float f : t.values()) put_le(out, std::bit_cast<std::uint32_t>(f));
}

const char* pooling_name(Pooling p) { return p == Pooling::Cls ? "cls" : "mean"; }

}  // namespace

json config_to_json(const EncoderConfig& c) {
  return json{{"layers", c.layers},         {"hidden", c.hidden},   {"heads", c.heads},
              {"ffn", c.ffn},               {"vocab_size", c.vocab_size},
              {"max_len", c.max_len},       {"dropout", c.dropout},
              {"pooling", pooling_name(c.pooling)}};
}

EncoderConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {"layers",  "hidden",  "heads",   "ffn",
                                              "vocab_size", "max_len", "dropout", "pooling"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw ConfigError("unknown encoder config key '" + it.key() + "'");
  EncoderConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn = j.at("ffn").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    const auto pooling = j.at("pooling").get<std::string>();
    if (pooling != "mean" && pooling != "cls") throw ConfigError("unknown pooling '" + pooling + "'");
    c.pooling = pooling == "cls" ? Pooling::Cls : Pooling::Mean;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  json header{{"encoder", config_to_json(ckpt.model.config())}, {"meta", ckpt.meta}};
  const std::string blob = header.dump();
  out.write("PMDC", 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  ckpt.model.visit([&](const std::string& name, const Tensor<float>& t) {
    put_le<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint64_t>(out, t.rank());
    for (std::size_t dim : t.shape()) put_le<std::uint64_t>(out, dim);
    put_floats(out, t);
  });
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PMDC", 4) != 0)
    throw DataError(path.string() + ": not a PMDC checkpoint");
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto blob_len = get_le<std::uint64_t>(in, path);
  if (blob_len > (1u << 26)) throw DataError(path.string() + ": implausible header length");
  std::string blob(blob_len, '\0');
  if (!in.read(blob.data(), static_cast<std::streamsize>(blob_len)))
    throw DataError(path.string() + ": truncated checkpoint");
  json header;
  try {
    header = json::parse(blob);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.model = BiEncoder<float>::zeros(config_from_json(header.at("encoder")));
  if (header.contains("meta")) ckpt.meta = header.at("meta");
  ckpt.model.visit([&](const std::string& expected, Tensor<float>& t) {
    const auto name_len = get_le<std::uint64_t>(in, path);
    if (name_len > 4096) throw DataError(path.string() + ": implausible tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len)))
      throw DataError(path.string() + ": truncated checkpoint");
    if (name != expected)
      throw DataError(path.string() + ": expected tensor '" + expected + "', found '" + name + "'");
    const auto rank = get_le<std::uint64_t>(in, path);
    if (rank != t.rank()) throw DataError(path.string() + ": rank mismatch for " + name);
    for (std::size_t i = 0; i < rank; ++i)
      if (get_le<std::uint64_t>(in, path) != t.shape()[i])
        throw DataError(path.string() + ": shape mismatch for " + name);
    for (auto& f : t.values()) f = std::bit_cast<float>(get_le<std::uint32_t>(in, path));
  });
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(path.string() + ": trailing bytes after last tensor");
  return ckpt;
}

std::uint64_t parameter_hash(const BiEncoder<float>& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  model.visit([&](const std::string& name, const Tensor<float>& t) {
    for (char c : name) mix(static_cast<std::uint8_t>(c));
    for (float f : t.values()) {
      const auto u = std::bit_cast<std::uint32_t>(f);
      for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(u >> (8 * i)));
    }
  });
  return h;
}

}  // namespace pmd::model
