// SPDX-License-Identifier: Apache-2.0
#include "pmd/eval/report.hpp"

#include <fstream>
#include <sstream>

#include "pmd/error.hpp"

namespace pmd::eval {

nlohmann::ordered_json to_json(const MetricsReport& r) {
  check_invariants(r.metrics);
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["grade"] = r.grade;
  j["parameter_count"] = r.parameter_count;
  j["mask_rate"] = r.mask_rate;
  j["alpha"] = r.alpha;
  j["beta"] = r.beta;
  j["strategy"] = r.strategy;
  j["split"] = r.split;
  j["MR"] = r.metrics.mr;
  j["MRR"] = r.metrics.mrr;
  j["hits1"] = r.metrics.hits1;
  j["hits3"] = r.metrics.hits3;
  j["hits10"] = r.metrics.hits10;
  j["queries"] = r.metrics.n;
  j["seed"] = r.seed;
  if (r.wall_clock_seconds)
    j["wall_clock_seconds"] = *r.wall_clock_seconds;
  else
    j["wall_clock_seconds"] = nullptr;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.stage = j.at("stage").get<std::string>();
    r.grade = j.at("grade").get<std::size_t>();
    r.parameter_count = j.at("parameter_count").get<std::size_t>();
    r.mask_rate = j.at("mask_rate").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.strategy = j.at("strategy").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.metrics.mr = j.at("MR").get<double>();
    r.metrics.mrr = j.at("MRR").get<double>();
    r.metrics.hits1 = j.at("hits1").get<double>();
    r.metrics.hits3 = j.at("hits3").get<double>();
    r.metrics.hits10 = j.at("hits10").get<double>();
    r.metrics.n = j.at("queries").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& w = j.at("wall_clock_seconds");
    if (!w.is_null()) r.wall_clock_seconds = w.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad metrics report: ") + e.what());
  }
  return r;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& r) {
  const std::string text = to_json(r).dump(2) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

MetricsReport read_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return report_from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pmd::eval
