// Copyright 2026 The ACAM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acam/kgstore.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>
#include <utility>

#include "acam/error.h"

namespace acam::kg {

std::uint32_t Vocabulary::intern(const std::string& name) {
  auto [it, inserted] =
      ids_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return in;
}

// Splits on tabs after stripping a trailing CR.
std::vector<std::string> split_tabs(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\r' || c == '\t'; });
}

}  // namespace

InteractionLog load_interactions(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  InteractionLog log;
  std::map<std::pair<UserId, ItemId>, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(path, line_no,
                       "expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    if (line_no == 1 && fields[0] == "user" && fields[1] == "item" &&
        fields[2] == "timestamp") {
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(path, line_no, "empty user or item id");
    }
    std::int64_t ts = 0;
    const std::string& raw = fields[2];
    auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), ts);
    if (ec != std::errc() || end != raw.data() + raw.size() || raw.empty()) {
      throw ParseError(path, line_no, "timestamp is not an integer: '" + raw + "'");
    }
    const UserId user = log.users.intern(fields[0]);
    const ItemId item = log.items.intern(fields[1]);
    auto [it, inserted] =
        seen.try_emplace({user, item}, log.interactions.size());
    if (inserted) {
      log.interactions.push_back({user, item, ts});
    } else {
      auto& kept = log.interactions[it->second];
      kept.timestamp = std::max(kept.timestamp, ts);
    }
  }
  if (log.interactions.empty()) throw ParseError(path, 0, "no interactions");
  return log;
}

AttributeTable::AttributeTable(std::size_t num_entities, std::size_t num_slots)
    : num_slots_(num_slots),
      slots_(num_entities, std::vector<std::vector<EntityId>>(num_slots)) {}

const std::vector<EntityId>& AttributeTable::values(EntityId entity,
                                                    RelationId relation) const {
  static const std::vector<EntityId> kEmpty;
  if (relation >= num_slots_) {
    throw Error("relation " + std::to_string(relation) + " out of range (M=" +
                std::to_string(num_slots_) + ")");
  }
  if (entity >= slots_.size()) return kEmpty;
  return slots_[entity][relation];
}

void AttributeTable::add(EntityId head, RelationId relation, EntityId tail) {
  if (head >= slots_.size()) resize(head + 1);
  auto& slot = slots_[head].at(relation);
  if (std::find(slot.begin(), slot.end(), tail) == slot.end()) {
    slot.push_back(tail);
  }
}

void AttributeTable::resize(std::size_t num_entities) {
  slots_.resize(num_entities, std::vector<std::vector<EntityId>>(num_slots_));
}

KnowledgeGraph load_triples(const std::string& path, std::size_t num_attributes,
                            const Vocabulary* items,
                            const std::vector<std::string>& relation_order) {
  if (num_attributes == 0) throw ConfigError("number of attributes M must be >= 1");
  if (relation_order.size() > num_attributes) {
    throw ConfigError("relation order lists " +
                      std::to_string(relation_order.size()) +
                      " attributes but M = " + std::to_string(num_attributes));
  }
  std::ifstream in = open_or_throw(path);
  KnowledgeGraph kg;
  if (items) {
    for (const auto& name : items->names()) kg.entities.intern(name);
  }
  for (const auto& name : relation_order) kg.relations.intern(name);
  const bool fixed_order = !relation_order.empty();
  kg.attributes = AttributeTable(kg.entities.size(), num_attributes);

  std::map<std::tuple<EntityId, RelationId, EntityId>, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty()) {
      throw ParseError(path, line_no, "expected `head\\trelation\\ttail`");
    }
    RelationId rel;
    if (fixed_order) {
      auto found = kg.relations.find(fields[1]);
      if (!found) {
        throw ParseError(path, line_no,
                         "relation '" + fields[1] + "' not in relation order");
      }
      rel = *found;
    } else {
      rel = kg.relations.intern(fields[1]);
      if (kg.relations.size() > num_attributes) {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": more than M = " + std::to_string(num_attributes) +
                          " distinct relations");
      }
    }
    const EntityId head = kg.entities.intern(fields[0]);
    const EntityId tail = kg.entities.intern(fields[2]);
    if (!seen.try_emplace({head, rel, tail}, true).second) continue;
    kg.triples.push_back({head, rel, tail});
    kg.attributes.add(head, rel, tail);
  }
  kg.attributes.resize(kg.entities.size());
  return kg;
}

std::vector<std::string> load_relation_order(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    names.push_back(line);
  }
  return names;
}

diff::Var transh_energies(diff::Var entities, diff::Var normals,
                          diff::Var translations,
                          std::span<const Triple> triples) {
  std::vector<std::vector<std::uint32_t>> heads, tails, rels;
  heads.reserve(triples.size());
  tails.reserve(triples.size());
  rels.reserve(triples.size());
  for (const Triple& t : triples) {
    heads.push_back({t.head});
    tails.push_back({t.tail});
    rels.push_back({t.relation});
  }
  using namespace diff;
  Var h = gather_mean(entities, std::move(heads));
  Var t = gather_mean(entities, std::move(tails));
  Var w = gather_mean(normals, rels);
  Var d = gather_mean(translations, std::move(rels));
  Var h_proj = sub(h, scale_rows(w, row_dot(w, h)));
  Var t_proj = sub(t, scale_rows(w, row_dot(w, t)));
  return row_squared_norm(sub(add(h_proj, d), t_proj));
}

diff::Var transh_energy(const Triple& triple, diff::Var entities,
                        diff::Var normals, diff::Var translations) {
  return diff::sum(transh_energies(entities, normals, translations,
                                   std::span<const Triple>(&triple, 1)));
}

diff::Var kge_batch_loss(std::span<const Triple> triples, diff::Var entities,
                         diff::Var normals, diff::Var translations) {
  if (triples.empty()) throw Error("kge_batch_loss: empty triple sample");
  return diff::mean(transh_energies(entities, normals, translations, triples));
}

void renormalize_rows(diff::Tensor& normals) {
  for (std::size_t r = 0; r < normals.rows(); ++r) {
    auto row = normals.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (double& v : row) v /= norm;
  }
}

}  // namespace acam::kg
