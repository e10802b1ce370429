// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "pmd/eval/ranking.hpp"

namespace pmd::eval {

/// One metrics file per trained grade (or per evaluation).
struct MetricsReport {
  std::string stage;  // "baseline", "pre-distill", "grade", "eval", "sweep", "scratch"
  std::size_t grade = 0;
  std::size_t parameter_count = 0;
  double mask_rate = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::string strategy;
  std::string split = "test";
  RankingMetrics metrics;
  std::uint64_t seed = 0;
  std::optional<double> wall_clock_seconds;  // null when timing is disabled

  bool operator==(const MetricsReport&) const = default;
};

/// Validates the metric invariants before serializing.
nlohmann::ordered_json to_json(const MetricsReport& r);
/// Throws DataError on missing or mistyped fields.
MetricsReport report_from_json(const nlohmann::json& j);

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& r);
MetricsReport read_metrics_json(const std::filesystem::path& path);

}  // namespace pmd::eval
