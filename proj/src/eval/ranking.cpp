// SPDX-License-Identifier: Apache-2.0
#include "pmd/eval/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pmd/error.hpp"
#include "pmd/scoring/scoring.hpp"

namespace pmd::eval {

RankingMetrics compute_metrics(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ConfigError("compute_metrics: no ranks");
  RankingMetrics m;
  m.n = ranks.size();
  double sum = 0.0, rsum = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (std::size_t r : ranks) {
    if (r == 0) throw ConfigError("compute_metrics: ranks start at 1");
    sum += double(r);
    rsum += 1.0 / double(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  const double n = double(m.n);
  m.mr = sum / n;
  m.mrr = rsum / n;
  m.hits1 = double(h1) / n;
  m.hits3 = double(h3) / n;
  m.hits10 = double(h10) / n;
  return m;
}

void check_invariants(const RankingMetrics& m) {
  constexpr double slack = 1e-12;
  auto fail = [](const char* what) { throw NumericError(std::string("metrics invariant violated: ") + what); };
  if (m.n == 0) fail("n > 0");
  if (!(m.mr >= 1.0)) fail("MR >= 1");
  if (!(m.mrr > 0.0 && m.mrr <= 1.0)) fail("0 < MRR <= 1");
  if (!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10 && m.hits10 <= 1.0 && m.hits1 >= 0.0))
    fail("hits1 <= hits3 <= hits10");
  if (m.mrr < m.hits1 * (1.0 - slack)) fail("MRR >= hits1");
  if (m.mrr < (1.0 / m.mr) * (1.0 - slack)) fail("MRR >= 1/MR");
}

std::size_t rank_from_scores(std::span<const double> scores, kg::EntityId true_tail,
                             std::span<const kg::EntityId> filter_set) {
  if (true_tail >= scores.size()) throw DataError("true tail outside candidate set");
  std::vector<char> skip(scores.size(), 0);
  for (kg::EntityId e : filter_set) {
    if (e == true_tail) throw DataError("true tail is in its own filter set");
    if (e < skip.size()) skip[e] = 1;
  }
  const double s = scores[true_tail];
  std::size_t rank = 1;
  for (std::size_t c = 0; c < scores.size(); ++c)
    if (c != true_tail && !skip[c] && scores[c] >= s) ++rank;
  return rank;
}

std::size_t rank_entities(std::span<const float> hr, const Tensor<float>& tails,
                          kg::EntityId true_tail, std::span<const kg::EntityId> filter_set) {
  std::vector<double> scores(tails.rows());
  for (std::size_t c = 0; c < tails.rows(); ++c) scores[c] = scoring::cosine_score<float>(hr, tails.row(c));
  return rank_from_scores(scores, true_tail, filter_set);
}

Tensor<float> encode_all_tails(const model::BiEncoder<float>& model, const text::SequenceBuilder& seqs,
                               std::size_t num_entities, std::size_t batch_size) {
  const std::size_t d = model.config().hidden;
  Tensor<float> out(num_entities, d);
  std::vector<text::TokenSequence> batch;
  for (std::size_t start = 0; start < num_entities; start += batch_size) {
    const std::size_t end = std::min(num_entities, start + batch_size);
    batch.clear();
    for (std::size_t e = start; e < end; ++e) batch.push_back(seqs.tail(static_cast<kg::EntityId>(e)));
    const auto enc = model::encode(model.tail, std::span(batch));
    std::copy(enc.pooled.values().begin(), enc.pooled.values().end(), out.data() + start * d);
  }
  return out;
}

EvalReport evaluate_split(const model::BiEncoder<float>& model, const kg::KnowledgeGraph& graph,
                          const text::SequenceBuilder& seqs, const kg::FilterIndex& filter,
                          kg::Split split, const EvalOptions& options) {
  if (!graph.augmented) throw ConfigError("evaluation needs an inverse-augmented graph");
  const auto& triples = graph.split(split);
  if (triples.empty()) throw ConfigError(std::string("split '") + std::string(kg::split_name(split)) + "' is empty");
  if (options.batch_size == 0) throw ConfigError("evaluation batch size must be positive");
  const std::size_t ne = graph.entities.size();

  Tensor<float> cached;
  std::vector<double> tail_norms;
  auto norms_of = [&](const Tensor<float>& t) {
    std::vector<double> n(t.rows());
    for (std::size_t c = 0; c < t.rows(); ++c) {
      n[c] = scoring::norm<float>(t.row(c));
      if (!(n[c] > 0.0)) throw NumericError("cosine_score: zero vector (degenerate encoder output)");
    }
    return n;
  };
  if (options.cache_tails) {
    cached = encode_all_tails(model, seqs, ne, options.batch_size);
    tail_norms = norms_of(cached);
  }

  EvalReport report;
  std::vector<std::size_t> ranks;
  ranks.reserve(triples.size());
  std::vector<double> scores(ne);
  std::vector<text::TokenSequence> batch;
  std::vector<kg::EntityId> filt;
  for (std::size_t start = 0; start < triples.size(); start += options.batch_size) {
    const std::size_t end = std::min(triples.size(), start + options.batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(seqs.hr(triples[i].head, triples[i].relation));
    const auto enc = model::encode(model.hr, std::span(batch));
    for (std::size_t i = start; i < end; ++i) {
      const auto& q = triples[i];
      Tensor<float> fresh;
      std::vector<double> fresh_norms;
      if (!options.cache_tails) {
        // odd chunk size so the uncached path batches differently
        fresh = encode_all_tails(model, seqs, ne, 7);
        fresh_norms = norms_of(fresh);
      }
      const Tensor<float>& tails = options.cache_tails ? cached : fresh;
      const std::vector<double>& tn = options.cache_tails ? tail_norms : fresh_norms;
      const auto h = enc.pooled.row(i - start);
      const double hn = scoring::norm<float>(h);
      if (!(hn > 0.0)) throw NumericError("cosine_score: zero vector (degenerate encoder output)");
      for (std::size_t c = 0; c < ne; ++c) {
        const auto t = tails.row(c);
        double dot = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) dot += double(h[k]) * double(t[k]);
        scores[c] = dot / (hn * tn[c]);
      }
      filt.clear();
      for (kg::EntityId e : filter.tails(q.head, q.relation))
        if (e != q.tail) filt.push_back(e);
      const std::size_t raw = rank_from_scores(scores, q.tail, {});
      const std::size_t fr = rank_from_scores(scores, q.tail, filt);
      ranks.push_back(options.filtered ? fr : raw);
      if (options.collect_queries)
        report.queries.push_back({q, q.relation >= graph.base_relation_count, raw, fr});
    }
  }
  report.metrics = compute_metrics(ranks);
  check_invariants(report.metrics);
  return report;
}

void write_query_csv(const std::filesystem::path& path, const kg::KnowledgeGraph& graph,
                     std::span<const QueryRank> queries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << "head,relation,tail,direction,raw_rank,filtered_rank\n";
  for (const auto& q : queries)
    out << quote(graph.entities[q.query.head].identifier) << ','
        << quote(graph.relations[q.query.relation].identifier) << ','
        << quote(graph.entities[q.query.tail].identifier) << ',' << (q.head_direction ? "head" : "tail")
        << ',' << q.raw_rank << ',' << q.filtered_rank << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace pmd::eval
