// SPDX-License-Identifier: Apache-2.0
#include "pmd/cli/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pmd/error.hpp"

namespace pmd::cli {
namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"seed", "42"},
      {"data.train", "data/synthetic/train.tsv"},
      {"data.valid", "data/synthetic/valid.tsv"},
      {"data.test", "data/synthetic/test.tsv"},
      {"data.descriptions", "data/synthetic/descriptions.json"},
      {"data.prepared", "prepared/synthetic"},
      {"vocab.min_freq", "1"},
      {"vocab.max_size", "0"},
      {"model.layers", "4"},
      {"model.hidden", "128"},
      {"model.heads", "4"},
      {"model.ffn", "256"},
      {"model.max_len", "32"},
      {"model.dropout", "0.1"},
      {"model.pooling", "mean"},
      {"train.batch_size", "32"},
      {"train.lr", "3e-4"},
      {"train.epochs", "50"},
      {"train.weight_decay", "0.01"},
      {"train.tau", "0.05"},
      {"train.full_softmax", "false"},
      {"train.mask_tail", "true"},
      {"train.keep_best", "true"},
      {"schedule.strategy", "pmd"},
      {"schedule.mode", "decreasing"},
      {"schedule.grades", "4,3,2,1"},
      {"schedule.mask_rates", "0.2,0.1,0.05,0"},
      {"schedule.alpha", "0.1"},
      {"schedule.beta", "0.1"},
      {"schedule.epochs", "10"},
      {"schedule.lr", "3e-4"},
      {"schedule.pre_init", "copy"},
      {"schedule.grade_init", "layer-select"},
      {"distill.lkd_temperature", "2"},
      {"distill.diagonal_score", "false"},
      {"distill.feature_layer", "0"},
      {"eval.filtered", "true"},
      {"eval.split", "test"},
      {"eval.batch_size", "64"},
      {"eval.query_csv", "false"},
      {"sweep.rates", "0,0.1,0.2,0.3,0.4,0.5"},
      {"output.dir", "runs/default"},
      {"run.record_timing", "true"},
  };
  return d;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(ss, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::apply_overrides(std::span<const std::string> items) {
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
    set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
}

void RunConfig::apply_environment() {
  if (const char* s = std::getenv("PMD_SEED"); s && *s) {
    parse_u64("PMD_SEED", s);
    set("seed", s);
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << render();
}

std::size_t RunConfig::get_size(const std::string& key) const { return parse_u64(key, get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_double(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) out.push_back(parse_u64(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::uint64_t RunConfig::seed() const { return parse_u64("seed", get("seed")); }

kg::GraphPaths RunConfig::graph_paths() const {
  return {get("data.train"), get("data.valid"), get("data.test"), get("data.descriptions")};
}
std::filesystem::path RunConfig::prepared_dir() const { return get("data.prepared"); }
std::filesystem::path RunConfig::output_dir() const { return get("output.dir"); }
std::size_t RunConfig::vocab_min_freq() const { return get_size("vocab.min_freq"); }
std::size_t RunConfig::vocab_max_size() const { return get_size("vocab.max_size"); }
bool RunConfig::record_timing() const { return get_bool("run.record_timing"); }
bool RunConfig::eval_filtered() const { return get_bool("eval.filtered"); }
kg::Split RunConfig::eval_split() const { return kg::parse_split(get("eval.split")); }

model::EncoderConfig RunConfig::encoder(std::size_t vocab_size) const {
  model::EncoderConfig c;
  c.layers = get_size("model.layers");
  c.hidden = get_size("model.hidden");
  c.heads = get_size("model.heads");
  c.ffn = get_size("model.ffn");
  c.max_len = get_size("model.max_len");
  c.dropout = get_double("model.dropout");
  c.vocab_size = vocab_size;
  const auto& pooling = get("model.pooling");
  if (pooling == "mean")
    c.pooling = model::Pooling::Mean;
  else if (pooling == "cls")
    c.pooling = model::Pooling::Cls;
  else
    throw ConfigError("model.pooling: expected mean or cls, got '" + pooling + "'");
  c.validate();
  if (c.max_len < 8) throw ConfigError("model.max_len must be at least 8");
  return c;
}

train::StageSpec RunConfig::baseline_stage() const {
  train::StageSpec s;
  s.grade = get_size("model.layers");
  s.mask_rate = 0.0;
  s.weights = {0.0, 0.0};
  s.epochs = get_size("train.epochs");
  s.lr = get_double("train.lr");
  s.batch_size = get_size("train.batch_size");
  s.init = train::InitMode::Fresh;
  s.validate();
  return s;
}

train::DistillSchedule RunConfig::schedule() const {
  train::DistillSchedule sch;
  sch.strategy = train::parse_strategy(get("schedule.strategy"));
  sch.mode = train::parse_mask_mode(get("schedule.mode"));
  const auto grades = get_sizes("schedule.grades");
  const auto rates = get_doubles("schedule.mask_rates");
  const std::size_t n = grades.size();
  // scalars broadcast to every stage
  auto per_stage = [&](const std::string& key) {
    auto v = get_doubles(key);
    if (v.size() == 1) v.assign(n, v[0]);
    if (v.size() != n) throw ConfigError(key + ": expected 1 or " + std::to_string(n) + " values");
    return v;
  };
  if (rates.size() != n) throw ConfigError("schedule.mask_rates must have one value per grade");
  const auto alpha = per_stage("schedule.alpha"), beta = per_stage("schedule.beta"),
             epochs = per_stage("schedule.epochs"), lr = per_stage("schedule.lr");
  if (grades.front() != get_size("model.layers"))
    throw ConfigError("schedule.grades must start at model.layers (the pre-distillation grade)");
  const auto pre_init = train::parse_init_mode(get("schedule.pre_init"));
  const auto grade_init = train::parse_init_mode(get("schedule.grade_init"));
  if (pre_init == train::InitMode::LayerSelect)
    throw ConfigError("schedule.pre_init must be copy or fresh");
  for (std::size_t i = 0; i < n; ++i) {
    train::StageSpec s;
    s.grade = grades[i];
    s.mask_rate = rates[i];
    s.weights = {alpha[i], beta[i]};
    if (epochs[i] < 1 || epochs[i] != double(std::size_t(epochs[i])))
      throw ConfigError("schedule.epochs must be positive integers");
    s.epochs = std::size_t(epochs[i]);
    s.lr = lr[i];
    s.batch_size = get_size("train.batch_size");
    s.init = i == 0 ? pre_init : grade_init;
    sch.stages.push_back(s);
  }
  sch.validate();
  return sch;
}

train::TrainOptions RunConfig::train_options() const {
  train::TrainOptions o;
  o.seed = seed();
  o.objective.tau = get_double("train.tau");
  if (!(o.objective.tau > 0.0)) throw ConfigError("train.tau must be positive");
  o.objective.lkd_temperature = get_double("distill.lkd_temperature");
  if (!(o.objective.lkd_temperature > 0.0)) throw ConfigError("distill.lkd_temperature must be positive");
  o.objective.diagonal_score = get_bool("distill.diagonal_score");
  o.objective.feature_layer = get_size("distill.feature_layer");
  o.adamw.weight_decay = get_double("train.weight_decay");
  o.mask_tail = get_bool("train.mask_tail");
  o.full_softmax = get_bool("train.full_softmax");
  o.keep_best = get_bool("train.keep_best");
  o.eval_batch_size = get_size("eval.batch_size");
  if (o.eval_batch_size == 0) throw ConfigError("eval.batch_size must be positive");
  return o;
}

std::vector<double> RunConfig::sweep_rates() const {
  auto r = get_doubles("sweep.rates");
  for (double x : r)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("sweep rate " + std::to_string(x) + " outside [0, 1]");
  return r;
}

void RunConfig::validate() const {
  seed();
  encoder(1);
  baseline_stage();
  const auto sch = schedule();
  const auto opts = train_options();
  if (opts.objective.feature_layer > sch.stages.back().grade)
    throw ConfigError("distill.feature_layer exceeds the smallest grade");
  vocab_min_freq();
  vocab_max_size();
  sweep_rates();
  record_timing();
  eval_filtered();
  eval_split();
  get_bool("eval.query_csv");
}

}  // namespace pmd::cli
