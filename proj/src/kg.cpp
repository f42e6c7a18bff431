#include "kgt/kg.hpp"

#include <algorithm>
#include <numeric>

namespace kgt {

void MultiSourceCollection::validate(bool allow_single_kg) const {
  if (kgs.empty()) throw DataError("collection has no graphs");
  if (kgs.size() == 1) {
    if (!allow_single_kg)
      throw DataError(
          "collection connectivity violated: a single-source "
          "collection needs the single-graph exemption enabled");
    return;
  }
  std::vector<bool> linked(kgs.size(), false);
  for (const auto& a : alignments) {
    if (a.pairs.empty()) continue;
    linked[static_cast<std::size_t>(kg_index(a.left_kg))] = true;
    linked[static_cast<std::size_t>(kg_index(a.right_kg))] = true;
  }
  for (std::size_t i = 0; i < kgs.size(); ++i)
    if (!linked[i])
      throw DataError("collection connectivity violated: graph '" + kgs[i].name +
                      "' shares no alignment with any other graph");
}

void validate_split(const KnowledgeGraph& kg, const DatasetSplit& split) {
  std::unordered_set<Triplet, TripletHash> train_set(split.train.begin(), split.train.end());
  std::unordered_set<Triplet, TripletHash> valid_set(split.valid.begin(), split.valid.end());
  auto check_in_graph = [&](const std::vector<Triplet>& part, const char* label) {
    for (const auto& t : part)
      if (!kg.has_triplet(t))
        throw DataError(std::string("split part '") + label + "' contains a triplet absent from the graph");
  };
  check_in_graph(split.train, "train");
  check_in_graph(split.valid, "valid");
  check_in_graph(split.test, "test");
  for (const auto& t : split.valid)
    if (train_set.contains(t)) throw DataError("split parts overlap: triplet in both train and valid");
  for (const auto& t : split.test) {
    if (train_set.contains(t)) throw DataError("split parts overlap: triplet in both train and test");
    if (valid_set.contains(t)) throw DataError("split parts overlap: triplet in both valid and test");
  }
  std::vector<bool> ent_seen(static_cast<std::size_t>(kg.entities.size()), false);
  std::vector<bool> rel_seen(static_cast<std::size_t>(kg.relations.size()), false);
  for (const auto& t : split.train) {
    ent_seen[static_cast<std::size_t>(t.s)] = true;
    ent_seen[static_cast<std::size_t>(t.o)] = true;
    rel_seen[static_cast<std::size_t>(t.r)] = true;
  }
  auto check_covered = [&](const std::vector<Triplet>& part, const char* label) {
    for (const auto& t : part) {
      if (!ent_seen[static_cast<std::size_t>(t.s)] || !ent_seen[static_cast<std::size_t>(t.o)])
        throw DataError(std::string("split part '") + label +
                        "' uses an entity absent from train (e.g. '" +
                        (ent_seen[static_cast<std::size_t>(t.s)] ? kg.entities.name(t.o)
                                                                 : kg.entities.name(t.s)) +
                        "')");
      if (!rel_seen[static_cast<std::size_t>(t.r)])
        throw DataError(std::string("split part '") + label + "' uses a relation absent from train ('" +
                        kg.relations.name(t.r) + "')");
    }
  };
  check_covered(split.valid, "valid");
  check_covered(split.test, "test");
}

FrequencyTable entity_frequencies(const KnowledgeGraph& kg) {
  FrequencyTable f;
  f.entity_counts.assign(static_cast<std::size_t>(kg.entities.size()), 0);
  f.relation_counts.assign(static_cast<std::size_t>(kg.relations.size()), 0);
  for (const auto& t : kg.triplets) {
    ++f.entity_counts[static_cast<std::size_t>(t.s)];
    ++f.entity_counts[static_cast<std::size_t>(t.o)];
    ++f.relation_counts[static_cast<std::size_t>(t.r)];
  }
  return f;
}

KnowledgeGraph add_reverse_triplets(const KnowledgeGraph& kg) {
  if (kg.reverse_closed) throw DataError("graph '" + kg.name + "' is already reverse-closed");
  KnowledgeGraph out;
  out.name = kg.name;
  out.entities = kg.entities;
  std::int32_t nr = kg.relations.size();
  for (std::int32_t r = 0; r < nr; ++r) out.add_relation(kg.relations.name(r), false);
  for (std::int32_t r = 0; r < nr; ++r) out.add_relation(kg.relations.name(r) + "[reverse]", true);
  for (const auto& t : kg.triplets) out.add_triplet(t);
  for (const auto& t : kg.triplets) out.add_triplet({t.o, t.r + nr, t.s});
  out.reverse_closed = true;
  return out;
}

OutgoingIndex build_outgoing_index(const KnowledgeGraph& kg) {
  OutgoingIndex idx;
  idx.by_subject.resize(static_cast<std::size_t>(kg.entities.size()));
  for (std::size_t i = 0; i < kg.triplets.size(); ++i)
    idx.by_subject[static_cast<std::size_t>(kg.triplets[i].s)].push_back(static_cast<std::int32_t>(i));
  return idx;
}

namespace {

struct UnionFind {
  std::vector<std::int32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::int32_t find(std::int32_t x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller id wins: keeps class representatives deterministic.
    if (b < a) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
  }
};

}  // namespace

MergeResult merge_aligned(const MultiSourceCollection& collection) {
  if (collection.kgs.empty()) throw DataError("merge_aligned: empty collection");
  std::vector<std::int32_t> offset(collection.kgs.size() + 1, 0);
  for (std::size_t i = 0; i < collection.kgs.size(); ++i)
    offset[i + 1] = offset[i] + collection.kgs[i].entities.size();
  auto total = static_cast<std::size_t>(offset.back());

  UnionFind uf(total);
  for (const auto& a : collection.alignments) {
    std::int32_t li = collection.kg_index(a.left_kg);
    std::int32_t ri = collection.kg_index(a.right_kg);
    const auto& lkg = collection.kgs[static_cast<std::size_t>(li)];
    const auto& rkg = collection.kgs[static_cast<std::size_t>(ri)];
    for (auto [l, r] : a.pairs) {
      if (l < 0 || l >= lkg.entities.size() || r < 0 || r >= rkg.entities.size())
        throw DataError("alignment between '" + a.left_kg + "' and '" + a.right_kg +
                        "' references an unknown entity");
      uf.unite(offset[static_cast<std::size_t>(li)] + l, offset[static_cast<std::size_t>(ri)] + r);
    }
  }

  MergeResult res;
  res.merged.name = "merged";
  std::vector<std::int32_t> class_id(total, -1);
  // Pass in global id order so class ids follow first appearance.
  for (std::size_t g = 0; g < total; ++g) {
    std::int32_t root = uf.find(static_cast<std::int32_t>(g));
    if (class_id[static_cast<std::size_t>(root)] < 0) {
      std::size_t kg_idx = 0;
      while (offset[kg_idx + 1] <= root) ++kg_idx;
      std::int32_t local = root - offset[kg_idx];
      const auto& kg = collection.kgs[kg_idx];
      class_id[static_cast<std::size_t>(root)] =
          res.merged.entities.get_or_add(kg.name + ":" + kg.entities.name(local));
    }
    class_id[g] = class_id[static_cast<std::size_t>(root)];
  }

  res.entity_class.resize(collection.kgs.size());
  res.relation_map.resize(collection.kgs.size());
  for (std::size_t k = 0; k < collection.kgs.size(); ++k) {
    const auto& kg = collection.kgs[k];
    res.entity_class[k].resize(static_cast<std::size_t>(kg.entities.size()));
    for (std::int32_t e = 0; e < kg.entities.size(); ++e)
      res.entity_class[k][static_cast<std::size_t>(e)] = class_id[static_cast<std::size_t>(offset[k] + e)];
    res.relation_map[k].resize(static_cast<std::size_t>(kg.relations.size()));
    for (std::int32_t r = 0; r < kg.relations.size(); ++r)
      res.relation_map[k][static_cast<std::size_t>(r)] =
          res.merged.add_relation(kg.name + ":" + kg.relations.name(r),
                                  kg.reverse_closed && kg.relation_is_reverse[static_cast<std::size_t>(r)]);
  }
  for (std::size_t k = 0; k < collection.kgs.size(); ++k) {
    const auto& kg = collection.kgs[k];
    for (const auto& t : kg.triplets) {
      res.merged.add_triplet({res.entity_class[k][static_cast<std::size_t>(t.s)],
                              res.relation_map[k][static_cast<std::size_t>(t.r)],
                              res.entity_class[k][static_cast<std::size_t>(t.o)]});
      ++res.mapped_triplets;
    }
  }
  return res;
}

LeakageResult remove_leakage(
    const KnowledgeGraph& background, const DatasetSplit& target_split,
    const AlignmentSet& alignment,
    const std::vector<std::pair<std::int32_t, std::int32_t>>* relation_map,
    bool audit_only) {
  // Held-out target pairs: (s, o) -> relations.
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> held;
  auto pair_key = [](std::int32_t a, std::int32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (const auto* part : {&target_split.valid, &target_split.test})
    for (const auto& t : *part) held[pair_key(t.s, t.o)].push_back(t.r);

  // Background entity -> aligned target entities.
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> counterparts;
  for (auto [l, r] : alignment.pairs) counterparts[l].push_back(r);

  std::unordered_set<std::uint64_t> mapped;  // (bg rel, tgt rel), both orientations
  if (relation_map)
    for (auto [br, tr] : *relation_map) mapped.insert(pair_key(br, tr));

  auto matches = [&](std::int32_t bg_rel, std::int32_t sub, std::int32_t obj) {
    auto si = counterparts.find(sub);
    auto oi = counterparts.find(obj);
    if (si == counterparts.end() || oi == counterparts.end()) return false;
    for (std::int32_t ts : si->second)
      for (std::int32_t to : oi->second) {
        auto hit = held.find(pair_key(ts, to));
        if (hit == held.end()) continue;
        if (!relation_map) return true;
        for (std::int32_t tr : hit->second)
          if (mapped.contains(pair_key(bg_rel, tr))) return true;
      }
    return false;
  };

  LeakageResult res;
  res.kg.name = background.name;
  res.kg.entities = background.entities;
  for (std::int32_t r = 0; r < background.relations.size(); ++r)
    res.kg.add_relation(background.relations.name(r),
                        background.reverse_closed &&
                            background.relation_is_reverse[static_cast<std::size_t>(r)]);
  res.kg.reverse_closed = background.reverse_closed;

  for (const auto& t : background.triplets) {
    bool leak = matches(t.r, t.s, t.o) || matches(t.r, t.o, t.s);
    if (leak) {
      ++res.report.deleted;
      res.report.deleted_triplets.push_back(t);
      if (audit_only) res.kg.add_triplet(t);
    } else {
      res.kg.add_triplet(t);
    }
  }
  return res;
}

}  // namespace kgt
