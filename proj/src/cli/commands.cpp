// SPDX-License-Identifier: Apache-2.0
#include "pmd/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pmd/error.hpp"
#include "pmd/model/checkpoint.hpp"
#include "pmd/train/pipeline.hpp"

namespace pmd::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::ofstream open_log(const fs::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << header << '\n';
  return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

std::string fmt_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

eval::MetricsReport make_report(const train::StageOutcome& o, const std::string& stage,
                                const std::string& strategy, std::uint64_t seed, bool timing) {
  eval::MetricsReport r;
  r.stage = stage;
  r.grade = o.spec.grade;
  r.parameter_count = o.model.parameter_count();
  r.mask_rate = o.spec.mask_rate;
  r.alpha = o.spec.weights.alpha;
  r.beta = o.spec.weights.beta;
  r.strategy = strategy;
  r.split = "test";
  r.metrics = o.test;
  r.seed = seed;
  if (timing) r.wall_clock_seconds = o.seconds;
  return r;
}

void save_stage(const fs::path& dir, const std::string& name, const train::StageOutcome& o,
                const eval::MetricsReport& report) {
  model::Checkpoint ckpt;
  ckpt.model = o.model;
  ckpt.meta = {{"stage", report.stage},
               {"label", o.label},
               {"grade", report.grade},
               {"strategy", report.strategy},
               {"mask_rate", report.mask_rate},
               {"alpha", report.alpha},
               {"beta", report.beta},
               {"seed", report.seed},
               {"best_epoch", o.best_epoch},
               {"steps", o.steps},
               {"valid_mrr", o.valid.mrr}};
  ckpt.meta["wall_clock_seconds"] =
      report.wall_clock_seconds ? nlohmann::json(*report.wall_clock_seconds) : nlohmann::json(nullptr);
  model::save_checkpoint(dir / (name + ".pmdc"), ckpt);
  eval::write_metrics_json(dir / (name + ".json"), report);
}

}  // namespace

Dataset load_prepared(const fs::path& dir, std::size_t max_len) {
  if (!fs::exists(dir / "vocab.txt"))
    throw DataError("no prepared dataset in " + dir.string() + " (run 'pmd prepare' first)");
  Dataset d;
  d.graph = kg::read_prepared_graph(dir);
  if (!d.graph.augmented) throw DataError(dir.string() + ": prepared graph is not inverse-augmented");
  d.vocab = text::Vocabulary::load(dir / "vocab.txt");
  d.filter = kg::build_filter_index(d.graph);
  d.seqs.emplace(d.graph, *d.vocab, max_len);
  return d;
}

ordered_json cmd_prepare(const RunConfig& config, bool force, std::ostream& out) {
  config.validate();
  const fs::path dir = config.prepared_dir();
  if (fs::exists(dir / "stats.json") && !force)
    throw ConfigError("prepared dataset already exists in " + dir.string() + " (use --force)");
  kg::LoadReport load;
  auto raw = kg::load_graph(config.graph_paths(), &load);
  auto graph = kg::add_inverse_triples(std::move(raw));
  const auto vocab = text::Vocabulary::build(graph, config.vocab_min_freq(), config.vocab_max_size());
  const auto filter = kg::build_filter_index(graph);

  fs::create_directories(dir);
  kg::write_prepared_graph(graph, dir);
  vocab.save(dir / "vocab.txt");

  ordered_json stats;
  stats["entities"] = load.entities;
  stats["relations"] = load.relations;
  stats["train"] = load.train;
  stats["valid"] = load.valid;
  stats["test"] = load.test;
  stats["augmented"] = {{"relations", graph.relations.size()},
                        {"train", graph.train.size()},
                        {"valid", graph.valid.size()},
                        {"test", graph.test.size()}};
  stats["unseen_entities"] = load.unseen_entities;
  stats["duplicates_dropped"] = load.duplicates_dropped;
  stats["vocab_size"] = vocab.size();
  stats["filter_keys"] = filter.key_count();
  stats["warnings"] = load.warnings;
  write_text(dir / "stats.json", stats.dump(2) + "\n");

  out << "entities " << load.entities << "  relations " << load.relations << "  train " << load.train
      << "  valid " << load.valid << "  test " << load.test << "\n";
  out << "augmented: train " << graph.train.size() << "  valid " << graph.valid.size() << "  test "
      << graph.test.size() << "  vocab " << vocab.size() << "\n";
  for (const auto& w : load.warnings) out << "warning: " << w << "\n";
  return stats;
}

void cmd_run(const RunConfig& config, bool force, std::ostream& progress) {
  config.validate();
  const fs::path dir = config.output_dir();
  const auto schedule = config.schedule();
  const auto data_set = load_prepared(config.prepared_dir(), config.get_size("model.max_len"));
  const auto data = data_set.training_data();
  const auto encoder = config.encoder(data_set.vocab->size());
  const bool timing = config.record_timing();
  const std::uint64_t seed = config.seed();
  const std::string strategy = train::strategy_name(schedule.strategy);

  prepare_output_dir(dir, force);
  config.save(dir / "config.resolved");
  data_set.vocab->save(dir / "vocab.txt");
  auto train_log = open_log(dir / "train.log", train::train_log_header());
  auto valid_log = open_log(dir / "valid.log", train::valid_log_header());
  auto options = config.train_options();
  options.train_log = &train_log;
  options.valid_log = &valid_log;
  options.progress = &progress;

  const auto base = train::train_baseline(data, encoder, config.baseline_stage(), options);
  save_stage(dir, "baseline", base, make_report(base, "baseline", strategy, seed, timing));
  progress << "baseline test MRR " << base.test.mrr << std::endl;
  if (schedule.strategy == train::Strategy::None) return;

  const auto teacher_hash = model::parameter_hash(base.model);
  auto pre_spec = schedule.stages[0];
  pre_spec.mask_rate = schedule.mask_rate(0);
  const auto pre = train::pre_distill(data, base.model, pre_spec, schedule.strategy, options);
  if (model::parameter_hash(base.model) != teacher_hash) throw NumericError("teacher changed during training");
  save_stage(dir, "stage-" + std::to_string(pre.spec.grade), pre,
             make_report(pre, "pre-distill", strategy, seed, timing));
  progress << "pre-distill test MRR " << pre.test.mrr << std::endl;

  const auto pre_hash = model::parameter_hash(pre.model);
  train::progressive_distill(data, schedule, pre.model, options, [&](const train::StageOutcome& o) {
    save_stage(dir, "stage-" + std::to_string(o.spec.grade), o, make_report(o, "grade", strategy, seed, timing));
    progress << o.label << " test MRR " << o.test.mrr << std::endl;
  });
  if (model::parameter_hash(pre.model) != pre_hash) throw NumericError("teacher changed during training");
}

std::string cmd_sweep_mask(const RunConfig& config, std::span<const double> rates,
                           const std::optional<fs::path>& baseline, std::ostream& progress) {
  config.validate();
  if (rates.empty()) throw ConfigError("no mask rates to sweep");
  for (double r : rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mask rate " + std::to_string(r) + " outside [0, 1]");
  const fs::path dir = config.output_dir();
  const auto data_set = load_prepared(config.prepared_dir(), config.get_size("model.max_len"));
  const auto data = data_set.training_data();
  const bool timing = config.record_timing();
  const std::uint64_t seed = config.seed();
  auto options = config.train_options();
  options.progress = &progress;
  fs::create_directories(dir);

  model::BiEncoder<float> teacher;
  const fs::path existing = baseline ? *baseline : dir / "baseline.pmdc";
  if (fs::exists(existing)) {
    teacher = model::load_checkpoint(existing).model;
    if (teacher.config().vocab_size != data_set.vocab->size())
      throw DataError(existing.string() + ": vocabulary size does not match the prepared dataset");
  } else if (baseline) {
    throw DataError("baseline checkpoint " + baseline->string() + " not found");
  } else {
    const auto base = train::train_baseline(data, config.encoder(data_set.vocab->size()),
                                            config.baseline_stage(), options);
    save_stage(dir, "baseline", base, make_report(base, "baseline", "none", seed, timing));
    teacher = base.model;
  }

  auto spec = config.schedule().stages[0];
  std::string csv = "rate,MR,MRR,hits1,hits3,hits10\n";
  for (double rate : rates) {
    spec.mask_rate = rate;
    const auto o = train::pre_distill(data, teacher, spec, train::Strategy::Pmd, options);
    const auto report = make_report(o, "sweep", "pmd", seed, timing);
    eval::write_metrics_json(dir / ("sweep-" + fmt_rate(rate) + ".json"), report);
    char row[256];
    std::snprintf(row, sizeof row, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", fmt_rate(rate).c_str(), o.test.mr,
                  o.test.mrr, o.test.hits1, o.test.hits3, o.test.hits10);
    csv += row;
    progress << "rate " << fmt_rate(rate) << " test MRR " << o.test.mrr << std::endl;
  }
  write_text(dir / "sweep-mask.csv", csv);
  return csv;
}

eval::MetricsReport cmd_eval(const RunConfig& config, const fs::path& checkpoint, kg::Split split,
                             const std::optional<fs::path>& queries_csv) {
  const auto ckpt = model::load_checkpoint(checkpoint);
  const auto data_set = load_prepared(config.prepared_dir(), ckpt.model.config().max_len);
  if (ckpt.model.config().vocab_size != data_set.vocab->size())
    throw DataError(checkpoint.string() + ": vocabulary size " + std::to_string(ckpt.model.config().vocab_size) +
                    " does not match the prepared dataset (" + std::to_string(data_set.vocab->size()) + ")");
  eval::EvalOptions opts;
  opts.filtered = config.eval_filtered();
  opts.batch_size = config.get_size("eval.batch_size");
  opts.collect_queries = queries_csv.has_value();
  const auto result =
      eval::evaluate_split(ckpt.model, data_set.graph, *data_set.seqs, data_set.filter, split, opts);
  if (queries_csv) eval::write_query_csv(*queries_csv, data_set.graph, result.queries);

  eval::MetricsReport r;
  const auto& m = ckpt.meta;
  r.stage = "eval";
  r.grade = ckpt.model.config().layers;
  r.parameter_count = ckpt.model.parameter_count();
  r.mask_rate = m.value("mask_rate", 0.0);
  r.alpha = m.value("alpha", 0.0);
  r.beta = m.value("beta", 0.0);
  r.strategy = m.value("strategy", std::string("unknown"));
  r.split = std::string(kg::split_name(split));
  r.metrics = result.metrics;
  r.seed = m.value("seed", std::uint64_t{0});
  // training time of the evaluated model, so repeated evaluations agree
  if (m.contains("wall_clock_seconds") && m["wall_clock_seconds"].is_number())
    r.wall_clock_seconds = m["wall_clock_seconds"].get<double>();
  return r;
}

std::string cmd_report(std::span<const fs::path> dirs, ReportFormat format) {
  struct Row {
    std::string run;
    std::string file;
    eval::MetricsReport r;
  };
  std::vector<Row> rows;
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".json" && e.path().filename() != "stats.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      rows.push_back({dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string(),
                      f.stem().string(), eval::read_metrics_json(f)});
  }
  if (rows.empty()) throw DataError("no metrics reports found");
  auto order = [](const eval::MetricsReport& r) {
    if (r.stage == "baseline") return 0;
    if (r.stage == "scratch") return 1;
    if (r.stage == "pre-distill") return 2;
    if (r.stage == "grade") return 3;
    return 4;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    if (a.run != b.run) return a.run < b.run;
    if (order(a.r) != order(b.r)) return order(a.r) < order(b.r);
    if (a.r.grade != b.r.grade) return a.r.grade > b.r.grade;
    return a.r.mask_rate < b.r.mask_rate;
  });

  std::ostringstream out;
  char buf[512];
  if (format == ReportFormat::Csv) {
    out << "run,report,stage,strategy,grade,parameters,mask_rate,alpha,beta,split,MR,MRR,hits1,hits3,hits10\n";
    for (const auto& row : rows) {
      const auto& r = row.r;
      std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%zu,%zu,%g,%g,%g,%s,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                    row.run.c_str(), row.file.c_str(), r.stage.c_str(), r.strategy.c_str(), r.grade,
                    r.parameter_count, r.mask_rate, r.alpha, r.beta, r.split.c_str(), r.metrics.mr,
                    r.metrics.mrr, r.metrics.hits1, r.metrics.hits3, r.metrics.hits10);
      out << buf;
    }
    return out.str();
  }
  out << "| run | report | strategy | grade | params | mask | alpha | beta | MR | MRR | Hits@1 | Hits@3 | Hits@10 |\n";
  out << "|---|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& row : rows) {
    const auto& r = row.r;
    std::snprintf(buf, sizeof buf,
                  "| %s | %s | %s | %zu | %zu | %g | %g | %g | %.2f | %.4f | %.4f | %.4f | %.4f |\n",
                  row.run.c_str(), row.file.c_str(), r.strategy.c_str(), r.grade, r.parameter_count,
                  r.mask_rate, r.alpha, r.beta, r.metrics.mr, r.metrics.mrr, r.metrics.hits1, r.metrics.hits3,
                  r.metrics.hits10);
    out << buf;
  }
  return out.str();
}

}  // namespace pmd::cli
