// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmd/cli/run_config.hpp"
#include "pmd/eval/report.hpp"
#include "pmd/kg/graph.hpp"
#include "pmd/text/sequence.hpp"
#include "pmd/text/vocab.hpp"

namespace pmd::cli {

/// A prepared dataset: augmented graph, vocabulary and filter index.
struct Dataset {
  kg::KnowledgeGraph graph;
  std::optional<text::Vocabulary> vocab;
  kg::FilterIndex filter;
  std::optional<text::SequenceBuilder> seqs;

  train::TrainingData training_data() const { return {&graph, &*seqs, &filter}; }
};

Dataset load_prepared(const std::filesystem::path& dir, std::size_t max_len);

/// Loads raw triples, augments, builds vocabulary and filter index, writes
/// artifacts plus stats.json into data.prepared and returns the stats.
/// Refuses to overwrite existing artifacts unless force is set.
nlohmann::ordered_json cmd_prepare(const RunConfig& config, bool force, std::ostream& out);

/// Baseline, then (unless strategy is none) pre-distillation and every
/// later grade. Writes into output.dir; refuses a non-empty directory unless
/// force is set.
void cmd_run(const RunConfig& config, bool force, std::ostream& progress);

/// Pre-distillation of one baseline at each mask rate; writes
/// sweep-mask.csv (rate,MR,MRR,hits1,hits3,hits10) into output.dir and
/// returns its text. Trains and saves a baseline when none is given and
/// output.dir has none.
std::string cmd_sweep_mask(const RunConfig& config, std::span<const double> rates,
                           const std::optional<std::filesystem::path>& baseline,
                           std::ostream& progress);

/// Evaluates a checkpoint on the prepared dataset.
eval::MetricsReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                             kg::Split split, const std::optional<std::filesystem::path>& queries_csv);

enum class ReportFormat { Markdown, Csv };

/// Grade-versus-metric table over every metrics JSON in the given run
/// directories.
std::string cmd_report(std::span<const std::filesystem::path> dirs, ReportFormat format);

}  // namespace pmd::cli
