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

// Interaction logs, knowledge-graph triples and the transH energy term.

#ifndef ACAM_KGSTORE_H_
#define ACAM_KGSTORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "acam/tape.h"

namespace acam::kg {

using UserId = std::uint32_t;
// Items share the entity id space: an item's id is its head-entity id.
using EntityId = std::uint32_t;
using ItemId = EntityId;
using RelationId = std::uint32_t;

// String <-> dense id map assigning ids in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(const std::string& name);
  std::optional<std::uint32_t> find(const std::string& name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Interaction {
  UserId user;
  ItemId item;
  std::int64_t timestamp;
};

struct InteractionLog {
  Vocabulary users;
  Vocabulary items;
  // One record per distinct (user, item), in first-seen order, carrying the
  // latest timestamp seen for the pair.
  std::vector<Interaction> interactions;
};

// Reads `user \t item \t timestamp` rows. A first line reading
// `user item timestamp` is skipped as a header.
InteractionLog load_interactions(const std::string& path);

// <head, relation, tail>. `relation` is 0-based: relation r fills attribute
// slot r + 1 of an item representation (slot 0 is the item itself).
struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  bool operator==(const Triple&) const = default;
};

// Per entity, M slots of deduplicated tail-entity ids.
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(std::size_t num_entities, std::size_t num_slots);

  std::size_t num_slots() const { return num_slots_; }
  std::size_t num_entities() const { return slots_.size(); }
  const std::vector<EntityId>& values(EntityId entity,
                                      RelationId relation) const;
  void add(EntityId head, RelationId relation, EntityId tail);
  void resize(std::size_t num_entities);

 private:
  std::size_t num_slots_ = 0;
  std::vector<std::vector<std::vector<EntityId>>> slots_;
};

struct KnowledgeGraph {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  AttributeTable attributes;
};

// Reads `head \t relation \t tail` rows into at most `num_attributes`
// relations. The entity vocabulary is seeded with `items` (so item ids and
// entity ids coincide). With `relation_order`, slot order is fixed by that
// list and unknown relations are rejected; otherwise relations take slots in
// first-seen order.
KnowledgeGraph load_triples(const std::string& path, std::size_t num_attributes,
                            const Vocabulary* items = nullptr,
                            const std::vector<std::string>& relation_order = {});

// Reads a relation-order file: one attribute name per line.
std::vector<std::string> load_relation_order(const std::string& path);

// Squared norm of the hyperplane-projected translation residual
//   (h - <w,h> w) + d - (t - <w,t> w)
// for every triple, as a [B] vector. `normals` and `translations` are M x d.
diff::Var transh_energies(diff::Var entities, diff::Var normals,
                          diff::Var translations,
                          std::span<const Triple> triples);

// Scalar energy of one triple.
diff::Var transh_energy(const Triple& triple, diff::Var entities,
                        diff::Var normals, diff::Var translations);

// Mean energy over a nonempty sample.
diff::Var kge_batch_loss(std::span<const Triple> triples, diff::Var entities,
                         diff::Var normals, diff::Var translations);

// Rescales every row of `normals` to unit L2 norm.
void renormalize_rows(diff::Tensor& normals);

}  // namespace acam::kg

#endif  // ACAM_KGSTORE_H_
