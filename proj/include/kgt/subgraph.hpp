#pragma once

#include "kgt/kg.hpp"

namespace kgt {

// Per-entity occurrence counts over the core set (both endpoints aligned).
struct PopularityTable {
  std::vector<std::int64_t> counts;
  std::int64_t triplet_popularity(const Triplet& t) const {
    return counts[static_cast<std::size_t>(t.s)] + counts[static_cast<std::size_t>(t.o)];
  }
};

struct LinkedSubgraph {
  std::vector<Triplet> full;     // background triplets with >= 1 aligned endpoint
  std::vector<Triplet> core;     // both endpoints aligned
  std::vector<Triplet> sampled;  // budgeted selection
  std::vector<std::int32_t> entities;                         // entity ids of `sampled`
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;   // alignment restricted to them
  PopularityTable popularity;
  std::int64_t budget = 0;
  std::int64_t shortfall = 0;  // triplets drawn from outside the core
};

// Builds the linked subgraph of `background` w.r.t. an alignment whose left
// side is the background graph, then samples it down to `budget`: a uniform
// subset of the core when the core suffices, otherwise the whole core plus a
// popularity-weighted draw without replacement from the remainder (weights
// floored at one so unseen entities stay reachable).
LinkedSubgraph build_linked_subgraph(const KnowledgeGraph& background,
                                     const AlignmentSet& alignment, std::int64_t budget,
                                     std::uint64_t seed);

// Weighted sampling without replacement via exponentiated uniform keys;
// selection distribution matches sequential weighted draws. Returns `k`
// indices into `weights`.
std::vector<std::size_t> weighted_sample_without_replacement(const std::vector<double>& weights,
                                                             std::size_t k, Rng& rng);

}  // namespace kgt
