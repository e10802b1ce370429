// SPDX-License-Identifier: Apache-2.0
//
// pmd: prepare data, train and distill, sweep mask rates, evaluate, report.
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "pmd/cli/commands.hpp"
#include "pmd/error.hpp"
#include "pmd/simd/kernels.hpp"

namespace {

using pmd::cli::RunConfig;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.path, "run configuration file");
  cmd->add_option("--set", args.overrides, "override a config key (key=value), repeatable");
}

RunConfig resolve(const ConfigArgs& args) {
  RunConfig c = args.path.empty() ? RunConfig() : RunConfig::load(args.path);
  c.apply_overrides(args.overrides);
  c.apply_environment();
  return c;
}

std::vector<double> parse_rates(const std::string& s) {
  RunConfig c;
  c.set("sweep.rates", s);
  return c.sweep_rates();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive masked-feature distillation for text-based knowledge graph completion"};
  app.require_subcommand(1);
  std::string simd = "auto";
  app.add_option("--simd", simd, "kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  ConfigArgs prepare_args, run_args, sweep_args, eval_args;
  bool prepare_force = false, run_force = false;

  auto* prepare = app.add_subcommand("prepare", "load triples, add inverses, build vocabulary");
  add_config_args(prepare, prepare_args);
  prepare->add_flag("--force", prepare_force, "overwrite existing artifacts");

  auto* run = app.add_subcommand("run", "baseline, pre-distillation and progressive distillation");
  add_config_args(run, run_args);
  run->add_flag("--force", run_force, "replace a non-empty output directory");

  auto* sweep = app.add_subcommand("sweep-mask", "pre-distillation at several mask rates");
  add_config_args(sweep, sweep_args);
  std::string rates_text;
  std::string baseline_path;
  sweep->add_option("--rates", rates_text, "comma-separated mask rates (default: sweep.rates)");
  sweep->add_option("--baseline", baseline_path, "trained baseline checkpoint");

  auto* evaluate = app.add_subcommand("eval", "evaluate a checkpoint");
  add_config_args(evaluate, eval_args);
  std::string ckpt_path, split_name, out_path, queries_path;
  evaluate->add_option("checkpoint", ckpt_path, "checkpoint (.pmdc)")->required();
  evaluate->add_option("--split", split_name, "valid or test (default: eval.split)");
  evaluate->add_option("-o,--out", out_path, "write the metrics JSON here");
  evaluate->add_option("--queries", queries_path, "write per-query ranks as CSV");

  auto* report = app.add_subcommand("report", "grade-versus-metric table from run directories");
  std::vector<std::string> report_dirs;
  std::string format = "markdown";
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--format", format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simd == "scalar") pmd::simd::set_backend(pmd::simd::Backend::Scalar);
    if (simd == "avx2") pmd::simd::set_backend(pmd::simd::Backend::Avx2);

    if (*prepare) {
      pmd::cli::cmd_prepare(resolve(prepare_args), prepare_force, std::cout);
    } else if (*run) {
      pmd::cli::cmd_run(resolve(run_args), run_force, std::cerr);
    } else if (*sweep) {
      const auto config = resolve(sweep_args);
      const auto rates = rates_text.empty() ? config.sweep_rates() : parse_rates(rates_text);
      std::optional<std::filesystem::path> base;
      if (!baseline_path.empty()) base = baseline_path;
      std::cout << pmd::cli::cmd_sweep_mask(config, rates, base, std::cerr);
    } else if (*evaluate) {
      const auto config = resolve(eval_args);
      const auto split = split_name.empty() ? config.eval_split() : pmd::kg::parse_split(split_name);
      std::optional<std::filesystem::path> queries;
      if (!queries_path.empty()) queries = queries_path;
      const auto r = pmd::cli::cmd_eval(config, ckpt_path, split, queries);
      if (!out_path.empty()) pmd::eval::write_metrics_json(out_path, r);
      std::cout << pmd::eval::to_json(r).dump(2) << "\n";
    } else if (*report) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      std::cout << pmd::cli::cmd_report(dirs, format == "csv" ? pmd::cli::ReportFormat::Csv
                                                              : pmd::cli::ReportFormat::Markdown);
    }
  } catch (const pmd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pmd::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const pmd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
