// SPDX-License-Identifier: Apache-2.0
//
// pmd_acceptance [N]: runs acceptance criterion N (1-9), or all of them,
// printing one PASS/FAIL/SKIP line per criterion. Exit status 0 when every
// selected criterion passes, 77 when a single selected criterion is skipped.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "pmd/cli/commands.hpp"
#include "pmd/cli/run_config.hpp"
#include "pmd/distill/losses.hpp"
#include "pmd/error.hpp"
#include "pmd/eval/ranking.hpp"
#include "pmd/eval/report.hpp"
#include "pmd/model/bi_encoder.hpp"
#include "pmd/model/checkpoint.hpp"
#include "pmd/scoring/scoring.hpp"
#include "pmd/text/masking.hpp"
#include "pmd/train/objective.hpp"
#include "pmd/train/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pmd;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::Fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Status::Pass : Status::Fail, std::move(d)}; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path work_root() {
  if (const char* w = std::getenv("PMD_ACCEPTANCE_DIR")) return w;
  return fs::current_path() / "acceptance-work";
}

fs::path fresh_dir(const std::string& name) {
  const auto d = work_root() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Loads a bundled config and anchors its data paths at the source tree.
cli::RunConfig bundled_config(const std::string& name, const fs::path& work) {
  const fs::path src = PMD_SOURCE_DIR;
  auto c = cli::RunConfig::load(src / "configs" / name);
  for (const char* key : {"data.train", "data.valid", "data.test", "data.descriptions"})
    c.set(key, (src / c.get(key)).string());
  c.set("data.prepared", (work / "prepared").string());
  c.set("output.dir", (work / "run").string());
  return c;
}

std::vector<fs::path> metric_files(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "stats.json")
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Every metrics JSON under root must satisfy the ranking invariants.
std::optional<std::string> scan_reports(const fs::path& root, std::size_t& count) {
  for (const auto& f : metric_files(root)) {
    try {
      eval::check_invariants(eval::read_metrics_json(f).metrics);
      ++count;
    } catch (const std::exception& e) {
      return f.string() + ": " + e.what();
    }
  }
  return std::nullopt;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testing::read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    rows.push_back(std::move(f));
  }
  return rows;
}

// Random token batch for the small property checks.
train::StepBatch random_batch(Rng& rng, std::size_t b, std::size_t vocab, std::size_t max_len, double rate) {
  auto hr = testing::random_sequences(rng, b, vocab, max_len, 3, max_len);
  auto tails = testing::random_sequences(rng, b, vocab, max_len, 3, max_len);
  train::StepBatch s;
  s.inputs = text::apply_mask(std::move(hr), std::move(tails), rate, rng);
  for (std::size_t i = 0; i < b; ++i) s.labels.push_back(i);
  return s;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  model::EncoderConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = 30;
  c.max_len = 12;
  c.dropout = 0.1;
  auto student = model::BiEncoder<double>::init(c, 7);
  auto tc = c;
  tc.layers = 4;
  const auto teacher = model::BiEncoder<double>::init(tc, 9);
  Rng rng(3);
  const auto batch = random_batch(rng, 4, 30, 12, 0.3);
  if (batch.inputs.masked_count() == 0) return fail("batch has no masked token");

  train::ObjectiveConfig oc;
  oc.strategy = train::Strategy::Pmd;
  oc.weights = {0.2, 0.3};
  auto loss = [&](model::BiEncoder<double>* grads) {
    Rng drop(11);
    model::ForwardOptions o;
    o.train = true;
    o.dropout_rng = &drop;
    return train::compute_step<double>(student, &teacher, batch, oc, o, grads);
  };
  auto grads = model::BiEncoder<double>::zeros(c);
  const auto l0 = loss(&grads);
  if (!(l0.global_term > 0.0 && l0.local_term > 0.0)) return fail("distillation terms are inactive");

  std::vector<std::pair<std::string, Tensor<double>*>> params;
  student.visit([&](const std::string& n, Tensor<double>& t) { params.emplace_back(n, &t); });
  std::vector<const Tensor<double>*> gs;
  grads.visit([&](const std::string&, const Tensor<double>& t) { gs.push_back(&t); });

  Rng pick(1);
  const int coords = 150;
  double worst = 0.0;
  std::string worst_at;
  for (int i = 0; i < coords; ++i) {
    const std::size_t k = pick.below(params.size());
    auto& t = *params[k].second;
    const std::size_t j = pick.below(t.size());
    const double orig = t[j], h = 1e-4;
    t[j] = orig + h;
    const double up = loss(nullptr).total;
    t[j] = orig - h;
    const double down = loss(nullptr).total;
    t[j] = orig;
    const double numeric = (up - down) / (2 * h), analytic = (*gs[k])[j];
    // absolute floor for coordinates whose gradient is numerically zero
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7});
    if (rel > worst) {
      worst = rel;
      worst_at = params[k].first + "[" + std::to_string(j) + "]";
    }
  }
  return verdict(worst < 1e-3, std::to_string(coords) + " coordinates, worst relative error " + fmt("%.2e", worst) +
                                   " at " + worst_at);
}

Outcome loss_algebra() {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double ce = rng.uniform() * 10, s = rng.uniform(), f = rng.uniform() * 3;
    if (distill::combined_loss(ce, s, f, {0.0, 0.0}) != ce) return fail("alpha=beta=0 differs from CE");
  }
  const double v = distill::combined_loss(1.0, 0.5, 2.0, {0.1, 0.1});
  if (v != 1.05) return fail("combined(1, 0.5, 2) = " + fmt("%.17g", v));

  for (int trial = 0; trial < 100; ++trial) {
    auto make = [&](std::size_t n) {
      model::EncoderOutput<double> o;
      o.offsets = {0, n, 2 * n};
      o.features = Tensor<double>(2 * n, 8);
      for (auto& x : o.features.values()) x = rng.normal();
      return o;
    };
    const auto teacher = make(6);
    auto student = make(6);
    std::vector<std::vector<std::uint32_t>> masks(2);
    for (std::uint32_t p = 0; p < 6; ++p)
      for (auto& m : masks)
        if (rng.uniform() < 0.3) m.push_back(p);
    const distill::TowerFeatures<double> tower{&student, &teacher, &masks};
    const double before = distill::mgfd_loss<double>(std::span(&tower, 1)).value;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::uint32_t p = 0; p < 6; ++p)
        if (std::find(masks[b].begin(), masks[b].end(), p) == masks[b].end())
          for (std::size_t c = 0; c < 8; ++c) student.features(b * 6 + p, c) += 1e3 * rng.normal();
    if (distill::mgfd_loss<double>(std::span(&tower, 1)).value != before)
      return fail("mgfd changed under an unmasked perturbation");
  }
  return pass("CE identity bitwise, 1.05 exact, mgfd unchanged under 100 unmasked perturbations");
}

Outcome masked_only() {
  auto cfg = testing::tiny_config(20, 2, 16, 2);
  cfg.max_len = 10;
  Rng rng(17);
  std::size_t unmasked_batches = 0, equal_batches = 0;
  const auto fixed_teacher = model::BiEncoder<float>::init(cfg, 1);
  for (int i = 0; i < 1000; ++i) {
    const double rate = i % 4 == 0 ? 0.0 : rng.uniform() * 0.5;
    auto batch = random_batch(rng, 1 + rng.below(6), 20, 10, rate);
    const bool none = batch.inputs.masked_count() == 0;
    train::ObjectiveConfig oc;
    oc.weights = {0.1, 0.1};
    if (none) {
      // a different teacher, so only the masking rule can zero the loss
      const auto student = model::BiEncoder<float>::init(cfg, 100 + i);
      const auto l = train::compute_step<float>(student, &fixed_teacher, batch, oc, {});
      if (l.local_term != 0.0 || l.local_active || l.local_contribution != 0.0)
        return fail("unmasked batch " + std::to_string(i) + " has a local term");
      ++unmasked_batches;
    } else {
      const auto student = model::BiEncoder<float>::init(cfg, 200 + i);
      const auto& teacher = student;
      for (auto strat : {train::Strategy::Pmd, train::Strategy::Lkd, train::Strategy::Pkd}) {
        oc.strategy = strat;
        const auto l = train::compute_step<float>(student, &teacher, batch, oc, {});
        if (l.global_term != 0.0 || l.local_term != 0.0)
          return fail(std::string(train::strategy_name(strat)) + " nonzero at teacher=student, batch " +
                      std::to_string(i));
      }
      ++equal_batches;
    }
  }
  return pass("1000 batches: " + std::to_string(unmasked_batches) + " unmasked with inactive zero MGFD, " +
              std::to_string(equal_batches) + " with score, MGFD, LKD and PKD all 0 at teacher=student");
}

Outcome metrics_oracle() {
  const std::vector<std::size_t> r{1, 2, 4};
  const auto m = eval::compute_metrics(r);
  if (m.mr != 7.0 / 3 || m.mrr != 7.0 / 12 || m.hits1 != 1.0 / 3 || m.hits3 != 2.0 / 3 || m.hits10 != 1.0)
    return fail("compute_metrics([1,2,4]) is not exact");

  const auto out = fresh_dir("criterion-4");
  std::size_t queries = 0;
  for (std::uint64_t g = 1; g <= 20; ++g) {
    testing::ToyGraphSpec spec;
    spec.entities = 50;
    spec.relations = 3 + g % 3;
    spec.train = 120;
    spec.valid = 15;
    spec.test = 15;
    spec.seed = 1000 + g;
    const testing::ToyData data(spec);
    auto cfg = testing::tiny_config(data.vocab.size(), 1 + g % 2, 16, 2);
    const auto model = model::BiEncoder<float>::init(cfg, g);
    const auto report = eval::evaluate_split(model, data.graph, data.seqs, data.filter, kg::Split::Test,
                                             {.batch_size = 1 + g % 9, .collect_queries = true});
    std::vector<Tensor<float>> tails;
    for (std::size_t e = 0; e < data.graph.entities.size(); ++e) {
      const std::vector<text::TokenSequence> one{data.seqs.tail(kg::EntityId(e))};
      tails.push_back(model::encode(model.tail, std::span<const text::TokenSequence>(one)).pooled);
    }
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < data.graph.test.size(); ++i) {
      const auto& q = data.graph.test[i];
      const std::vector<text::TokenSequence> one{data.seqs.hr(q.head, q.relation)};
      const auto hr = model::encode(model.hr, std::span<const text::TokenSequence>(one)).pooled;
      const double st = scoring::cosine_score<float>(hr.row(0), tails[q.tail].row(0));
      std::size_t rank = 1;
      for (std::size_t c = 0; c < tails.size(); ++c)
        if (c != q.tail && !data.filter.contains(q.head, q.relation, kg::EntityId(c)) &&
            scoring::cosine_score<float>(hr.row(0), tails[c].row(0)) >= st)
          ++rank;
      if (report.queries[i].filtered_rank != rank)
        return fail("graph " + std::to_string(g) + " query " + std::to_string(i) + ": batched rank " +
                    std::to_string(report.queries[i].filtered_rank) + " vs brute force " + std::to_string(rank));
      ranks.push_back(rank);
    }
    if (!(eval::compute_metrics(ranks) == report.metrics)) return fail("metrics differ on graph " + std::to_string(g));
    queries += ranks.size();
    eval::MetricsReport rep;
    rep.stage = "eval";
    rep.grade = cfg.layers;
    rep.parameter_count = model.parameter_count();
    rep.strategy = "none";
    rep.metrics = report.metrics;
    rep.seed = g;
    eval::write_metrics_json(out / ("graph-" + std::to_string(g) + ".json"), rep);
  }
  std::size_t scanned = 0;
  if (auto err = scan_reports(work_root(), scanned)) return fail("invariant violated in " + *err);
  return pass("exact [1,2,4] metrics; " + std::to_string(queries) +
              " brute-force ranks identical over 20 graphs; invariants hold in " + std::to_string(scanned) +
              " emitted reports");
}

Outcome distillation_benefit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto work = fresh_dir("criterion-5");
  auto config = bundled_config("synthetic.cfg", work);
  std::ostringstream sink;
  cli::cmd_prepare(config, true, sink);
  const auto ds = cli::load_prepared(config.prepared_dir(), config.get_size("model.max_len"));
  const auto data = ds.training_data();
  if (ds.graph.entities.size() < 100 || ds.graph.base_relation_count < 8) return fail("synthetic KG too small");

  auto options = config.train_options();
  options.progress = &std::cerr;
  const auto encoder = config.encoder(ds.vocab->size());
  const auto teacher = train::train_baseline(data, encoder, config.baseline_stage(), options, "teacher");
  std::cerr << "teacher test MRR " << teacher.test.mrr << "\n";

  const auto schedule = config.schedule();
  double pmd_sum = 0, scratch_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto o = options;
    o.seed = seed;
    auto pre_spec = schedule.stages[0];
    pre_spec.mask_rate = schedule.mask_rate(0);
    const auto pre = train::pre_distill(data, teacher.model, pre_spec, schedule.strategy, o);
    const auto stages = train::progressive_distill(data, schedule, pre.model, o);
    std::size_t steps = pre.steps;
    for (const auto& s : stages) steps += s.steps;
    const auto& student = stages.back();
    if (student.model.config().layers != 1) return fail("schedule does not end at one layer");

    // scratch student: same depth, same number of optimizer steps
    auto spec = config.baseline_stage();
    spec.grade = 1;
    const std::size_t per_epoch = train::stage_steps(data, {.grade = 1, .epochs = 1, .batch_size = spec.batch_size});
    spec.epochs = steps / per_epoch;
    spec.lr = schedule.stages.back().lr;
    const auto scratch = train::train_baseline(data, encoder, spec, o, "scratch");
    if (scratch.steps != steps)
      return fail("step budgets differ: " + std::to_string(scratch.steps) + " vs " + std::to_string(steps));
    pmd_sum += student.test.mrr;
    scratch_sum += scratch.test.mrr;
    per_seed += " seed " + std::to_string(seed) + ": pmd " + fmt("%.4f", student.test.mrr) + " scratch " +
                fmt("%.4f", scratch.test.mrr) + ";";
    std::cerr << per_seed << "\n";
  }
  const double pmd = pmd_sum / 3, scratch = scratch_sum / 3, secs = seconds_since(t0);
  return verdict(pmd >= scratch && secs < 1800,
                 "teacher " + fmt("%.4f", teacher.test.mrr) + ";" + per_seed + " mean pmd " + fmt("%.4f", pmd) +
                     " vs scratch " + fmt("%.4f", scratch) + "; " + fmt("%.0f", secs) + " s");
}

Outcome schedule_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto work = fresh_dir("criterion-6");
  const fs::path src = PMD_SOURCE_DIR;
  auto cli = [&](const std::string& args, const std::string& log) {
    const std::string cmd = "cd '" + src.string() + "' && '" + std::string(PMD_CLI_PATH) + "' " + args + " > '" +
                            (work / log).string() + "' 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string prepared = "--set data.prepared=" + (work / "prepared").string();
  if (cli("prepare -c configs/synthetic.cfg " + prepared + " --force", "prepare.log") != 0)
    return fail("prepare failed, see " + (work / "prepare.log").string());

  std::string detail;
  for (const std::string mode : {"synthetic", "synthetic-fixed"}) {
    const auto out = work / mode;
    if (cli("run -c configs/" + mode + ".cfg " + prepared + " --set output.dir=" + out.string() + " --force",
            mode + ".log") != 0)
      return fail(mode + " run failed, see " + (work / (mode + ".log")).string());
    const auto schedule = cli::RunConfig::load(src / "configs" / (mode + ".cfg")).schedule();
    std::vector<double> rates;
    std::size_t last_params = SIZE_MAX;
    for (const auto& st : schedule.stages) {
      const auto rep = eval::read_metrics_json(out / ("stage-" + std::to_string(st.grade) + ".json"));
      if (rep.parameter_count >= last_params) return fail(mode + ": parameter count does not decrease");
      last_params = rep.parameter_count;
      rates.push_back(rep.mask_rate);
    }
    const std::vector<double> expect = mode == "synthetic" ? std::vector<double>{0.2, 0.1, 0.05, 0.0}
                                                            : std::vector<double>(4, 0.2);
    if (rates != expect) return fail(mode + ": unexpected mask-rate sequence");
    std::size_t grade1 = 0, masked = 0;
    for (const auto& row : read_tsv(out / "train.log")) {
      if (row[0] != "grade-1") continue;
      ++grade1;
      masked += std::stoul(row[8]);
      if (mode == "synthetic" && std::stod(row[7]) != 0.0) return fail("grade-1 step with MGFD contribution");
    }
    if (grade1 == 0) return fail(mode + ": no grade-1 steps logged");
    if (mode == "synthetic-fixed" && masked == 0) return fail("fixed mode did not mask the last grade");
    std::size_t scanned = 0;
    if (auto err = scan_reports(out, scanned)) return fail("invariant violated in " + *err);
    detail += mode + " rates (";
    for (std::size_t i = 0; i < rates.size(); ++i) detail += (i ? "," : "") + fmt("%g", rates[i]);
    detail += ") params strictly decreasing; ";
    if (mode == "synthetic") detail += std::to_string(grade1) + " grade-1 steps with zero MGFD contribution; ";
  }
  const double secs = seconds_since(t0);
  return verdict(secs < 3600, detail + fmt("%.0f", secs) + " s for both runs");
}

Outcome reproducibility() {
  const auto work = fresh_dir("criterion-7");
  auto config = bundled_config("synthetic.cfg", work);
  // short stages: the property under test is determinism, not accuracy
  config.set("train.epochs", "4");
  config.set("schedule.epochs", "1");
  config.set("run.record_timing", "false");
  config.set("output.dir", (work / "first").string());
  config.save(work / "persisted.cfg");
  std::ostringstream sink;
  cli::cmd_prepare(config, true, sink);

  for (const char* name : {"first", "second"}) {
    auto c = cli::RunConfig::load(work / "persisted.cfg");
    c.set("output.dir", (work / name).string());
    cli::cmd_run(c, true, sink);
  }
  const auto files = metric_files(work / "first");
  if (files.size() != 5) return fail("expected 5 metrics files, found " + std::to_string(files.size()));
  for (const auto& f : files) {
    const auto other = work / "second" / f.filename();
    if (!fs::exists(other) || testing::read_file(f) != testing::read_file(other))
      return fail(f.filename().string() + " differs between runs");
  }
  if (testing::read_file(work / "first" / "stage-1.pmdc") != testing::read_file(work / "second" / "stage-1.pmdc"))
    return fail("checkpoints differ between runs");

  // save -> load -> evaluate against the metrics written during training
  const auto ckpt = model::load_checkpoint(work / "first" / "stage-1.pmdc");
  model::save_checkpoint(work / "copy.pmdc", ckpt);
  const auto reloaded = model::load_checkpoint(work / "copy.pmdc");
  if (!(reloaded.model == ckpt.model)) return fail("round-tripped parameters differ");
  const auto trained = eval::read_metrics_json(work / "first" / "stage-1.json");
  const auto a = cli::cmd_eval(config, work / "first" / "stage-1.pmdc", kg::Split::Test, std::nullopt);
  const auto b = cli::cmd_eval(config, work / "copy.pmdc", kg::Split::Test, std::nullopt);
  if (!(a.metrics == trained.metrics) || !(b.metrics == trained.metrics))
    return fail("re-evaluated metrics differ from the training report");
  return pass(std::to_string(files.size()) + " metrics files byte-identical across two runs; round-trip eval MRR " +
              fmt("%.6f", b.metrics.mrr) + " identical");
}

std::size_t hand_count(const model::EncoderConfig& c) {
  const std::size_t d = c.hidden, f = c.ffn;
  std::size_t n = c.vocab_size * d;  // token embeddings
  n += c.max_len * d;                // positions
  n += d + d;                        // embedding norm
  for (std::size_t l = 0; l < c.layers; ++l) {
    n += d * d + d;  // query
    n += d * d + d;  // key
    n += d * d + d;  // value
    n += d * d + d;  // attention output
    n += d + d;      // norm 1
    n += d * f + f;  // ffn in
    n += f * d + d;  // ffn out
    n += d + d;      // norm 2
  }
  return n;
}

Outcome parameter_accounting() {
  struct Toy {
    std::size_t layers, hidden, heads, ffn, vocab, max_len;
  };
  const Toy toys[] = {{1, 8, 2, 16, 10, 8}, {2, 16, 2, 32, 50, 16}, {3, 24, 3, 40, 7, 12},
                      {4, 128, 4, 256, 300, 32}, {6, 12, 4, 48, 1000, 64}};
  for (const auto& t : toys) {
    model::EncoderConfig c;
    c.layers = t.layers;
    c.hidden = t.hidden;
    c.heads = t.heads;
    c.ffn = t.ffn;
    c.vocab_size = t.vocab;
    c.max_len = t.max_len;
    const std::size_t expect = hand_count(c);
    if (model::count_params(c) != expect || model::init_params<float>(c, 1).parameter_count() != expect)
      return fail("count mismatch for a " + std::to_string(t.layers) + "-layer toy");
  }
  model::EncoderConfig bert;
  bert.layers = 12;
  bert.hidden = 768;
  bert.heads = 12;
  bert.ffn = 3072;
  bert.vocab_size = 30522;
  bert.max_len = 512;
  auto small = bert;
  small.layers = 3;
  // judged under shared token embeddings; the separate-table figure is reported alongside
  const double shared =
      100.0 * (1.0 - double(model::count_bi_encoder_params(small, true)) / double(model::count_bi_encoder_params(bert, true)));
  const double separate =
      100.0 * (1.0 - double(model::count_bi_encoder_params(small)) / double(model::count_bi_encoder_params(bert)));
  return verdict(std::abs(shared - 56.7) <= 3.0,
                 "5 toy configs exact; 12 to 3 layers removes " + fmt("%.2f", shared) +
                     "% with shared token embeddings (target 56.7 +- 3); separate tower embeddings give " +
                     fmt("%.2f", separate) + "% and a 3-layer pair of " +
                     fmt("%.1f", double(model::count_bi_encoder_params(small)) / 1e6) + "M");
}

Outcome ingestion() {
  const char* dir = std::getenv("PMD_WN18RR_DIR");
  if (!dir) return {Status::Skip, "set PMD_WN18RR_DIR to a WN18RR copy (train.tsv, valid.tsv, test.tsv)"};
  const fs::path d = dir;
  const auto work = fresh_dir("criterion-9");
  cli::RunConfig c;
  c.set("data.train", (d / "train.tsv").string());
  c.set("data.valid", (d / "valid.tsv").string());
  c.set("data.test", (d / "test.tsv").string());
  std::string desc;
  for (const char* name : {"descriptions.json", "descriptions.tsv", "wordnet-mlj12-definitions.txt"})
    if (fs::exists(d / name)) {
      desc = (d / name).string();
      break;
    }
  c.set("data.descriptions", desc);
  c.set("data.prepared", (work / "prepared").string());
  std::ostringstream sink;
  const auto stats = cli::cmd_prepare(c, true, sink);
  const std::size_t got[] = {stats["entities"], stats["relations"], stats["train"], stats["valid"], stats["test"]};
  const std::size_t want[] = {40943, 11, 86835, 3034, 3134};
  std::string detail;
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    detail += (i ? " / " : "") + std::to_string(got[i]);
    ok &= got[i] == want[i];
  }
  return verdict(ok, "counts " + detail + " (expected 40943 / 11 / 86835 / 3034 / 3134)");
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"gradient correctness", gradient_check},   {"loss algebra", loss_algebra},
      {"masked-only rule", masked_only},          {"metrics oracle", metrics_oracle},
      {"distillation benefit", distillation_benefit}, {"schedule invariants", schedule_invariants},
      {"reproducibility", reproducibility},       {"parameter accounting", parameter_accounting},
      {"ingestion fidelity", ingestion},
  };
  std::vector<std::size_t> selected;
  if (argc > 1) {
    const int n = std::atoi(argv[1]);
    if (n < 1 || n > int(all.size())) {
      std::cerr << "usage: pmd_acceptance [1-" << all.size() << "]\n";
      return 2;
    }
    selected.push_back(std::size_t(n - 1));
  } else {
    for (std::size_t i = 0; i < all.size(); ++i) selected.push_back(i);
  }

  bool failed = false, skipped = false;
  for (std::size_t i : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = fail(std::string("error: ") + e.what());
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    std::cout << "criterion " << i + 1 << " " << tag << ": " << all[i].name << ": " << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
    failed |= o.status == Status::Fail;
    skipped |= o.status == Status::Skip;
  }
  if (failed) return 1;
  return skipped && selected.size() == 1 ? 77 : 0;
}
