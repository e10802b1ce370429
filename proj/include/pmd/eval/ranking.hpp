// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmd/kg/graph.hpp"
#include "pmd/model/bi_encoder.hpp"
#include "pmd/text/sequence.hpp"

namespace pmd::eval {

struct RankingMetrics {
  double mr = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t n = 0;

  bool operator==(const RankingMetrics&) const = default;
};

/// Throws ConfigError on an empty list or a rank of 0.
RankingMetrics compute_metrics(std::span<const std::size_t> ranks);

/// Throws NumericError unless 1 <= MR, 0 < MRR <= 1, hits1 <= hits3 <=
/// hits10 <= 1, MRR >= hits1 and MRR >= 1/MR (the last two up to one part in
/// 1e12 for rounding in the means).
void check_invariants(const RankingMetrics& m);

/// 1 + #{c != true_tail, c not filtered : score[c] >= score[true_tail]}.
/// Ties count against the true tail. Throws DataError when true_tail is in
/// filter_set.
std::size_t rank_from_scores(std::span<const double> scores, kg::EntityId true_tail,
                             std::span<const kg::EntityId> filter_set);

/// Scores every row of tails against hr with cosine_score, then ranks.
std::size_t rank_entities(std::span<const float> hr, const Tensor<float>& tails,
                          kg::EntityId true_tail, std::span<const kg::EntityId> filter_set);

/// Pooled tail-tower embeddings of every entity, in id order.
Tensor<float> encode_all_tails(const model::BiEncoder<float>& model, const text::SequenceBuilder& seqs,
                               std::size_t num_entities, std::size_t batch_size = 64);

struct QueryRank {
  kg::Triple query;     // as stored in the augmented split
  bool head_direction;  // true when the query predicts the original head
  std::size_t raw_rank;
  std::size_t filtered_rank;
};

struct EvalOptions {
  bool filtered = true;
  /// Encode tails once per evaluation (false re-encodes them per query;
  /// only sensible on toy graphs).
  bool cache_tails = true;
  std::size_t batch_size = 64;
  bool collect_queries = false;
};

struct EvalReport {
  RankingMetrics metrics;  // filtered or raw, per EvalOptions::filtered
  std::vector<QueryRank> queries;
};

/// Ranks every triple of the split (both directions after inverse
/// augmentation) against all entities. Throws ConfigError when the graph is
/// not augmented or the split is empty.
EvalReport evaluate_split(const model::BiEncoder<float>& model, const kg::KnowledgeGraph& graph,
                          const text::SequenceBuilder& seqs, const kg::FilterIndex& filter,
                          kg::Split split, const EvalOptions& options = {});

/// query head, relation, tail (identifiers), direction, raw rank, filtered rank.
void write_query_csv(const std::filesystem::path& path, const kg::KnowledgeGraph& graph,
                     std::span<const QueryRank> queries);

}  // namespace pmd::eval
