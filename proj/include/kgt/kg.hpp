#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgt/common.hpp"

namespace kgt {

struct Triplet {
  std::int32_t s = 0;
  std::int32_t r = 0;
  std::int32_t o = 0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = (h ^ static_cast<std::uint32_t>(t.s)) * 0x100000001b3ULL;
    h = (h ^ static_cast<std::uint32_t>(t.r)) * 0x100000001b3ULL;
    h = (h ^ static_cast<std::uint32_t>(t.o)) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h);
  }
};

// Insertion-ordered string vocabulary (first appearance wins the index).
class Vocab {
 public:
  std::int32_t get_or_add(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    auto id = static_cast<std::int32_t>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
  }
  std::optional<std::int32_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// A single knowledge graph: entity/relation vocabularies plus a deduplicated,
// insertion-ordered triplet list. Relations added by reverse closure carry
// the "[reverse]" suffix and a flag.
class KnowledgeGraph {
 public:
  std::string name;
  Vocab entities;
  Vocab relations;
  std::vector<bool> relation_is_reverse;
  std::vector<Triplet> triplets;
  bool reverse_closed = false;

  std::int32_t add_relation(const std::string& rel, bool is_reverse = false) {
    std::int32_t before = relations.size();
    std::int32_t id = relations.get_or_add(rel);
    if (relations.size() > before) relation_is_reverse.push_back(is_reverse);
    return id;
  }

  // Returns true if the triplet was new.
  bool add_triplet(Triplet t) {
    check_triplet(t);
    if (seen_.contains(t)) return false;
    seen_.insert(t);
    triplets.push_back(t);
    return true;
  }

  bool has_triplet(Triplet t) const { return seen_.contains(t); }

  // Index of the reverse counterpart of a relation; only valid once closed.
  std::int32_t reverse_relation(std::int32_t r) const {
    if (!reverse_closed) throw DataError("reverse_relation: graph is not reverse-closed");
    std::int32_t base = relations.size() / 2;
    return r < base ? r + base : r - base;
  }

  void check_triplet(Triplet t) const {
    if (t.s < 0 || t.s >= entities.size() || t.o < 0 || t.o >= entities.size() ||
        t.r < 0 || t.r >= relations.size())
      throw DataError("triplet index out of range in graph '" + name + "'");
  }

 private:
  std::unordered_set<Triplet, TripletHash> seen_;
};

// Cross-graph entity correspondence (left graph entity, right graph entity).
struct AlignmentSet {
  std::string left_kg;
  std::string right_kg;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;

  void add(std::int32_t l, std::int32_t r) {
    std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) |
                        static_cast<std::uint32_t>(r);
    if (seen_.contains(key)) return;
    seen_.insert(key);
    pairs.emplace_back(l, r);
  }

 private:
  std::unordered_set<std::uint64_t> seen_;
};

struct MultiSourceCollection {
  std::vector<KnowledgeGraph> kgs;
  std::vector<AlignmentSet> alignments;

  std::int32_t kg_index(const std::string& kg_name) const {
    for (std::size_t i = 0; i < kgs.size(); ++i)
      if (kgs[i].name == kg_name) return static_cast<std::int32_t>(i);
    throw DataError("unknown graph '" + kg_name + "' in collection");
  }

  // Every graph must be linked to at least one other through an alignment
  // set; a single-graph collection is only legal with the exemption flag.
  void validate(bool allow_single_kg = false) const;
};

struct DatasetSplit {
  std::vector<Triplet> train;
  std::vector<Triplet> valid;
  std::vector<Triplet> test;
};

// Checks split invariants against the full graph: pairwise disjoint parts,
// all triplets present in the graph, and valid/test vocabulary covered by
// train. Throws DataError with the first few offenders named.
void validate_split(const KnowledgeGraph& kg, const DatasetSplit& split);

struct FrequencyTable {
  std::vector<std::int64_t> entity_counts;    // subject + object occurrences
  std::vector<std::int64_t> relation_counts;  // triplet occurrences
};

FrequencyTable entity_frequencies(const KnowledgeGraph& kg);

// Appends r[reverse] relations and the reversed triplets. Rejects graphs
// that are already closed.
KnowledgeGraph add_reverse_triplets(const KnowledgeGraph& kg);

// Outgoing adjacency: for each entity the list of triplet indices with that
// subject. On a reverse-closed graph every entity has at least one entry.
struct OutgoingIndex {
  std::vector<std::vector<std::int32_t>> by_subject;
};
OutgoingIndex build_outgoing_index(const KnowledgeGraph& kg);

struct MergeResult {
  KnowledgeGraph merged;
  // entity_class[kg][local] -> merged entity id
  std::vector<std::vector<std::int32_t>> entity_class;
  // relation_map[kg][local] -> merged relation id
  std::vector<std::vector<std::int32_t>> relation_map;
  std::int64_t mapped_triplets = 0;  // pre-deduplication count
};

// Collapses aligned entities into equivalence classes (union-find over all
// alignment sets); relation labels are namespaced "graph:relation". The class
// keeps the name of its first member in (graph order, vocabulary order).
MergeResult merge_aligned(const MultiSourceCollection& collection);

struct LeakageReport {
  std::int64_t deleted = 0;
  std::vector<Triplet> deleted_triplets;  // indices in the background graph
};

struct LeakageResult {
  KnowledgeGraph kg;
  LeakageReport report;
};

// Removes background triplets whose aligned counterpart completes a target
// validation/test triplet, in either orientation. With a relation map only
// mapped relation pairs are deleted; without one any entity-pair match is
// deleted (strict mode). `audit_only` keeps the graph intact and just counts.
LeakageResult remove_leakage(
    const KnowledgeGraph& background, const DatasetSplit& target_split,
    const AlignmentSet& alignment,
    const std::vector<std::pair<std::int32_t, std::int32_t>>* relation_map = nullptr,
    bool audit_only = false);

}  // namespace kgt
