// SPDX-License-Identifier: Apache-2.0
#include "pmd/kg/graph.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmd/error.hpp"

namespace pmd::kg {
namespace {

using nlohmann::json;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string clean_text(std::string s) {
  std::replace(s.begin(), s.end(), '\t', ' ');
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string default_relation_name(std::string_view id) {
  std::string s(id);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

struct TextEntry {
  std::string name;
  std::string description;
};

struct Descriptions {
  std::unordered_map<std::string, TextEntry> entities;
  std::unordered_map<std::string, std::string> relations;
  std::vector<std::string> entity_order;  // file order, for description-only entities
};

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

void read_entry_object(const json& obj, const std::string& id, TextEntry& out,
                       const std::filesystem::path& path) {
  if (obj.is_string()) {
    out.name = id;
    out.description = obj.get<std::string>();
    return;
  }
  if (!obj.is_object()) throw DataError(path.string() + ": entry '" + id + "' is not an object");
  out.name = obj.contains("name") ? obj.at("name").get<std::string>() : id;
  out.description = obj.contains("description") ? obj.at("description").get<std::string>() : "";
}

Descriptions load_descriptions(const std::filesystem::path& path) {
  Descriptions d;
  if (path.empty()) return d;
  auto in = open_or_throw(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
    const bool structured = doc.contains("entities") && doc.at("entities").is_object();
    const json& ents = structured ? doc.at("entities") : doc;
    for (auto it = ents.begin(); it != ents.end(); ++it) {
      TextEntry e;
      read_entry_object(it.value(), it.key(), e, path);
      e.name = clean_text(e.name);
      e.description = clean_text(e.description);
      d.entity_order.push_back(it.key());
      d.entities.emplace(it.key(), std::move(e));
    }
    if (structured && doc.contains("relations")) {
      const json& rels = doc.at("relations");
      for (auto it = rels.begin(); it != rels.end(); ++it) {
        const json& v = it.value();
        std::string name = v.is_string() ? v.get<std::string>()
                           : v.contains("name") ? v.at("name").get<std::string>()
                                                : default_relation_name(it.key());
        d.relations.emplace(it.key(), clean_text(name));
      }
    }
    return d;
  }
  // TSV: "id<TAB>name<TAB>description" for entities, "id<TAB>name" for relations.
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() == 3) {
      if (!d.entities.contains(f[0])) d.entity_order.push_back(f[0]);
      d.entities[f[0]] = TextEntry{f[1], f[2]};
    } else if (f.size() == 2) {
      d.relations[f[0]] = f[1];
    } else {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 2 or 3 tab-separated fields, got " + std::to_string(f.size()));
    }
  }
  return d;
}

struct RawTriple {
  std::string head, relation, tail;
  std::size_t line;
};

std::vector<RawTriple> read_triples(const std::filesystem::path& path) {
  std::vector<RawTriple> out;
  if (path.empty()) return out;
  auto in = open_or_throw(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 3 non-empty tab-separated fields (head, relation, tail)");
    out.push_back({std::move(f[0]), std::move(f[1]), std::move(f[2]), lineno});
  }
  return out;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, valid or test)");
}

const std::vector<Triple>& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    default: return test;
  }
}

std::vector<Triple>& KnowledgeGraph::split(Split s) {
  return const_cast<std::vector<Triple>&>(std::as_const(*this).split(s));
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view identifier) const {
  auto it = entity_index_.find(std::string(identifier));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view identifier) const {
  auto it = relation_index_.find(std::string(identifier));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

void KnowledgeGraph::reindex() {
  entity_index_.clear();
  relation_index_.clear();
  for (std::size_t i = 0; i < entities.size(); ++i)
    entity_index_.emplace(entities[i].identifier, static_cast<EntityId>(i));
  for (std::size_t i = 0; i < relations.size(); ++i)
    relation_index_.emplace(relations[i].identifier, static_cast<RelationId>(i));
}

KnowledgeGraph load_graph(const GraphPaths& paths, LoadReport* report) {
  const Descriptions desc = load_descriptions(paths.descriptions);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  KnowledgeGraph g;
  std::unordered_map<std::string, EntityId> eids;
  std::unordered_map<std::string, RelationId> rids;

  auto entity_id = [&](const std::string& ident, bool in_train, const std::filesystem::path& file,
                       std::size_t line) -> EntityId {
    if (auto it = eids.find(ident); it != eids.end()) return it->second;
    auto d = desc.entities.find(ident);
    if (!in_train && d == desc.entities.end())
      throw DataError(file.string() + ":" + std::to_string(line) + ": entity '" + ident +
                      "' appears in neither the training triples nor the descriptions file");
    Entity e;
    e.identifier = ident;
    if (d != desc.entities.end()) {
      e.name = d->second.name.empty() ? ident : d->second.name;
      e.description = d->second.description.empty() ? e.name : d->second.description;
    } else {
      e.name = ident;
      e.description = ident;
    }
    e.unseen = !in_train;
    const auto id = static_cast<EntityId>(g.entities.size());
    g.entities.push_back(std::move(e));
    eids.emplace(ident, id);
    return id;
  };
  auto relation_id = [&](const std::string& ident) -> RelationId {
    if (auto it = rids.find(ident); it != rids.end()) return it->second;
    Relation r;
    r.identifier = ident;
    auto d = desc.relations.find(ident);
    r.name = d != desc.relations.end() ? d->second : default_relation_name(ident);
    const auto id = static_cast<RelationId>(g.relations.size());
    g.relations.push_back(std::move(r));
    rids.emplace(ident, id);
    return id;
  };

  const std::pair<Split, const std::filesystem::path*> files[] = {
      {Split::Train, &paths.train}, {Split::Valid, &paths.valid}, {Split::Test, &paths.test}};
  for (const auto& [split, path] : files) {
    const auto raw = read_triples(*path);
    std::set<Triple> seen;
    auto& out = g.split(split);
    for (const auto& t : raw) {
      const bool train = split == Split::Train;
      Triple tr{entity_id(t.head, train, *path, t.line), relation_id(t.relation),
                entity_id(t.tail, train, *path, t.line)};
      if (!seen.insert(tr).second) {
        ++rep.duplicates_dropped;
        rep.warnings.push_back(path->string() + ":" + std::to_string(t.line) +
                               ": duplicate triple dropped");
        continue;
      }
      out.push_back(tr);
    }
  }
  // Entities known only from the descriptions file remain rankable candidates.
  for (const auto& ident : desc.entity_order) {
    if (eids.contains(ident)) continue;
    const auto& d = desc.entities.at(ident);
    Entity e{ident, d.name.empty() ? ident : d.name, "", true};
    e.description = d.description.empty() ? e.name : d.description;
    eids.emplace(ident, static_cast<EntityId>(g.entities.size()));
    g.entities.push_back(std::move(e));
  }

  g.base_relation_count = g.relations.size();
  g.reindex();

  rep.entities = g.entities.size();
  rep.relations = g.relations.size();
  rep.train = g.train.size();
  rep.valid = g.valid.size();
  rep.test = g.test.size();
  rep.unseen_entities = static_cast<std::size_t>(
      std::count_if(g.entities.begin(), g.entities.end(), [](const Entity& e) { return e.unseen; }));
  return g;
}

KnowledgeGraph add_inverse_triples(KnowledgeGraph graph) {
  if (graph.augmented) throw DataError("already augmented");
  const auto base = static_cast<RelationId>(graph.relations.size());
  for (RelationId r = 0; r < base; ++r) {
    Relation inv = graph.relations[r];
    inv.identifier = "inverse " + inv.identifier;
    inv.name = "inverse " + inv.name;
    inv.inverse = true;
    graph.relations.push_back(std::move(inv));
  }
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    auto& triples = graph.split(s);
    const std::size_t n = triples.size();
    triples.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Triple t = triples[i];
      triples.push_back({t.tail, t.relation + base, t.head});
    }
  }
  graph.base_relation_count = base;
  graph.augmented = true;
  graph.reindex();
  return graph;
}

RelationId inverse_relation(const KnowledgeGraph& graph, RelationId r) {
  const auto base = static_cast<RelationId>(graph.base_relation_count);
  return r < base ? r + base : r - base;
}

void FilterIndex::insert(const Triple& t) {
  auto& tails = index_[key(t.head, t.relation)];
  auto it = std::lower_bound(tails.begin(), tails.end(), t.tail);
  if (it == tails.end() || *it != t.tail) tails.insert(it, t.tail);
}

bool FilterIndex::contains(EntityId head, RelationId relation, EntityId tail) const {
  const auto t = tails(head, relation);
  return std::binary_search(t.begin(), t.end(), tail);
}

std::span<const EntityId> FilterIndex::tails(EntityId head, RelationId relation) const {
  auto it = index_.find(key(head, relation));
  if (it == index_.end()) return {};
  return it->second;
}

FilterIndex build_filter_index(const KnowledgeGraph& graph) {
  FilterIndex index;
  for (Split s : {Split::Train, Split::Valid, Split::Test})
    for (const auto& t : graph.split(s)) index.insert(t);
  return index;
}

void write_prepared_graph(const KnowledgeGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "entities.tsv", std::ios::binary);
    for (std::size_t i = 0; i < graph.entities.size(); ++i) {
      const auto& e = graph.entities[i];
      out << i << '\t' << e.identifier << '\t' << e.name << '\t' << e.description << '\t'
          << (e.unseen ? 1 : 0) << '\n';
    }
  }
  {
    std::ofstream out(dir / "relations.tsv", std::ios::binary);
    for (std::size_t i = 0; i < graph.relations.size(); ++i) {
      const auto& r = graph.relations[i];
      out << i << '\t' << r.identifier << '\t' << r.name << '\t' << (r.inverse ? 1 : 0) << '\n';
    }
  }
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    std::ofstream out(dir / (std::string(split_name(s)) + ".tsv"), std::ios::binary);
    for (const auto& t : graph.split(s)) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  }
  json meta{{"base_relation_count", graph.base_relation_count}, {"augmented", graph.augmented}};
  std::ofstream(dir / "graph.json", std::ios::binary) << meta.dump(2) << '\n';
}

KnowledgeGraph read_prepared_graph(const std::filesystem::path& dir) {
  KnowledgeGraph g;
  auto rows = [&](const std::string& file, std::size_t fields, auto&& fn) {
    auto in = open_or_throw(dir / file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_tabs(line);
      if (f.size() != fields)
        throw DataError((dir / file).string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(fields) + " fields");
      fn(f, lineno);
    }
  };
  rows("entities.tsv", 5, [&](auto& f, std::size_t) {
    g.entities.push_back({f[1], f[2], f[3], f[4] == "1"});
  });
  rows("relations.tsv", 4, [&](auto& f, std::size_t) {
    g.relations.push_back({f[1], f[2], f[3] == "1"});
  });
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    const std::string file = std::string(split_name(s)) + ".tsv";
    rows(file, 3, [&](auto& f, std::size_t lineno) {
      Triple t;
      try {
        t = {static_cast<EntityId>(std::stoul(f[0])), static_cast<RelationId>(std::stoul(f[1])),
             static_cast<EntityId>(std::stoul(f[2]))};
      } catch (const std::exception&) {
        throw DataError((dir / file).string() + ":" + std::to_string(lineno) + ": bad id");
      }
      if (t.head >= g.entities.size() || t.tail >= g.entities.size() ||
          t.relation >= g.relations.size())
        throw DataError((dir / file).string() + ":" + std::to_string(lineno) + ": id out of range");
      g.split(s).push_back(t);
    });
  }
  auto in = open_or_throw(dir / "graph.json");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError((dir / "graph.json").string() + ": " + e.what());
  }
  g.base_relation_count = meta.at("base_relation_count").get<std::size_t>();
  g.augmented = meta.at("augmented").get<bool>();
  g.reindex();
  return g;
}

}  // namespace pmd::kg
