// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented run configuration:
//
//   # comment
//   section.key = value
//
// Every key has a default; unknown keys are rejected. Later assignments win,
// so command-line overrides are applied after the file.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pmd/kg/graph.hpp"
#include "pmd/model/encoder.hpp"
#include "pmd/train/pipeline.hpp"

namespace pmd::cli {

class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError (with file:line) on syntax errors or unknown keys,
  /// DataError when the file cannot be read.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

  /// Throws ConfigError on unknown keys.
  void set(const std::string& key, const std::string& value);
  /// "key=value" items, as given with --set.
  void apply_overrides(std::span<const std::string> items);
  /// PMD_SEED, when set, replaces `seed`.
  void apply_environment();

  const std::string& get(const std::string& key) const;
  /// Every key, sorted, one "key = value" line each.
  std::string render() const;
  void save(const std::filesystem::path& path) const;

  /// Builds every typed view once so errors surface before any compute.
  void validate() const;

  std::uint64_t seed() const;
  kg::GraphPaths graph_paths() const;
  std::filesystem::path prepared_dir() const;
  std::filesystem::path output_dir() const;
  std::size_t vocab_min_freq() const;
  std::size_t vocab_max_size() const;
  model::EncoderConfig encoder(std::size_t vocab_size) const;
  train::StageSpec baseline_stage() const;
  train::DistillSchedule schedule() const;
  train::TrainOptions train_options() const;
  std::vector<double> sweep_rates() const;
  bool record_timing() const;
  bool eval_filtered() const;
  kg::Split eval_split() const;

  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pmd::cli
