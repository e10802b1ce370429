// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pmd::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

enum class Split { Train, Valid, Test };

std::string_view split_name(Split s);
/// Parses "train" / "valid" / "test"; throws ConfigError otherwise.
Split parse_split(std::string_view s);

struct Entity {
  std::string identifier;
  std::string name;
  std::string description;
  /// True when the entity never occurs in a training triple.
  bool unseen = false;
};

struct Relation {
  std::string identifier;
  std::string name;
  bool inverse = false;
};

struct KnowledgeGraph {
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  /// Relation count before inverse augmentation.
  std::size_t base_relation_count = 0;
  bool augmented = false;

  const std::vector<Triple>& split(Split s) const;
  std::vector<Triple>& split(Split s);

  std::optional<EntityId> find_entity(std::string_view identifier) const;
  std::optional<RelationId> find_relation(std::string_view identifier) const;

  /// Rebuilds the identifier lookup tables after entities/relations change.
  void reindex();

 private:
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
};

struct GraphPaths {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
  std::filesystem::path descriptions;  // optional; empty path means none
};

struct LoadReport {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  std::size_t unseen_entities = 0;
  std::size_t duplicates_dropped = 0;
  std::vector<std::string> warnings;
};

/// Reads tab-separated triple files plus an optional descriptions file
/// (JSON object or TSV). Ids are dense, assigned in first-seen order over
/// train, valid, test, then description-only entities. Duplicate triples
/// within a split are dropped with a warning. Throws DataError with
/// file:line context on malformed input.
KnowledgeGraph load_graph(const GraphPaths& paths, LoadReport* report = nullptr);

/// Adds (t, r + R, h) for every (h, r, t) in every split; inverse relation
/// text is "inverse " + name. Throws DataError("already augmented") when
/// called twice.
KnowledgeGraph add_inverse_triples(KnowledgeGraph graph);

/// Relation id of the inverse of r in an augmented graph.
RelationId inverse_relation(const KnowledgeGraph& graph, RelationId r);

/// (head, relation) -> every tail known true across train, valid and test.
class FilterIndex {
 public:
  void insert(const Triple& t);
  bool contains(EntityId head, RelationId relation, EntityId tail) const;
  /// Sorted tails for (head, relation); empty span when unknown.
  std::span<const EntityId> tails(EntityId head, RelationId relation) const;
  std::size_t key_count() const { return index_.size(); }

 private:
  static std::uint64_t key(EntityId h, RelationId r) {
    return (std::uint64_t{h} << 32) | r;
  }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> index_;
};

FilterIndex build_filter_index(const KnowledgeGraph& graph);

/// Prepared-dataset artifacts: entities.tsv, relations.tsv, graph.json and
/// {train,valid,test}.tsv with dense ids.
void write_prepared_graph(const KnowledgeGraph& graph, const std::filesystem::path& dir);
KnowledgeGraph read_prepared_graph(const std::filesystem::path& dir);

}  // namespace pmd::kg
