#include "kgt/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "kgt/kg_io.hpp"

namespace kgt {

namespace {

std::string ent_name(char prefix, std::int32_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%03d", prefix, i);
  return std::string(buf);
}

struct Family {
  std::string ra, rb, rc;  // background relation names
  std::string ta, tb, tc;  // target relation names
};

}  // namespace

TransferScenario generate_transfer_scenario(const ScenarioConfig& config) {
  if (config.n_entities < 20) throw ConfigError("scenario needs at least 20 entities");
  if (config.n_relations < 3 || config.n_relations % 3 != 0)
    throw ConfigError("scenario n_relations must be a positive multiple of 3");
  if (config.alignment_fraction < 0 || config.alignment_fraction > 1)
    throw ConfigError("alignment_fraction must lie in [0, 1]");
  if (config.planted_confidence <= 0 || config.planted_confidence > 1)
    throw ConfigError("planted_confidence must lie in (0, 1]");

  std::int32_t n = config.n_entities;
  std::int32_t families = config.n_relations / 3;
  TransferScenario sc;
  sc.config = config;
  sc.background.name = "background";
  sc.target.name = "target";

  std::vector<Family> fams(static_cast<std::size_t>(families));
  for (std::int32_t f = 0; f < families; ++f) {
    std::string suffix = families == 1 ? "" : std::to_string(f);
    fams[static_cast<std::size_t>(f)] = {"ra" + suffix, "rb" + suffix, "rc" + suffix,
                                         "ta" + suffix, "tb" + suffix, "tc" + suffix};
  }

  Rng chain_rng(derive_seed(config.seed, 1));
  Rng part_rng(derive_seed(config.seed, 2));
  Rng align_rng(derive_seed(config.seed, 3));
  Rng edge_rng(derive_seed(config.seed, 4));

  // The aligned index subset is fixed first: chain endpoints are drawn from
  // it so every composed pair is bridgeable through the alignment, which
  // keeps the planted rule's joint-graph confidence at the planted rate and
  // makes every held-out triplet derivable. A bridge too small to host
  // chains (the alignment_fraction ~ 0 control) falls back to the full index
  // space; the audit then reports the lost derivability instead of erroring.
  std::vector<std::int32_t> align_order(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) align_order[static_cast<std::size_t>(i)] = i;
  fisher_yates(align_order, align_rng);
  auto n_aligned = static_cast<std::size_t>(
      std::lround(config.alignment_fraction * static_cast<double>(n)));
  std::vector<std::int32_t> endpoint_pool(align_order.begin(),
                                          align_order.begin() + static_cast<std::ptrdiff_t>(n_aligned));
  if (endpoint_pool.size() < 4) endpoint_pool = align_order;
  auto draw_endpoint = [&]() {
    return endpoint_pool[chain_rng.index(endpoint_pool.size())];
  };

  auto bg_ent = [&](std::int32_t i) { return sc.background.entities.get_or_add(ent_name('b', i)); };
  auto tg_ent = [&](std::int32_t i) { return sc.target.entities.get_or_add(ent_name('t', i)); };

  struct Edge {
    std::int32_t s, o;
  };
  std::unordered_set<Triplet, TripletHash> train_set;
  auto add_train = [&](std::int32_t s, std::int32_t r, std::int32_t o) {
    Triplet t{s, r, o};
    if (sc.target.add_triplet(t)) {
      sc.split.train.push_back(t);
      train_set.insert(t);
    }
  };

  for (std::int32_t f = 0; f < families; ++f) {
    const Family& fam = fams[static_cast<std::size_t>(f)];
    std::int32_t ra = sc.background.add_relation(fam.ra);
    std::int32_t rb = sc.background.add_relation(fam.rb);
    std::int32_t rc = sc.background.add_relation(fam.rc);
    std::int32_t ta = sc.target.add_relation(fam.ta);
    std::int32_t tb = sc.target.add_relation(fam.tb);
    std::int32_t tc = sc.target.add_relation(fam.tc);
    sc.relation_map.emplace_back(rc, tc);

    // Chain skeleton over abstract indices; both graphs share it.
    std::map<std::int32_t, std::vector<std::int32_t>> ra_by_obj, rb_by_subj;
    std::vector<Edge> ra_edges, rb_edges;
    std::unordered_set<std::uint64_t> edge_seen;
    auto ekey = [](std::int32_t rel, std::int32_t s, std::int32_t o) {
      return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(rel)) << 42) ^
             (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 21) ^
             static_cast<std::uint32_t>(o);
    };
    std::int32_t n_chains = 2 * n;
    for (std::int32_t c = 0; c < n_chains; ++c) {
      auto x = draw_endpoint();
      std::int32_t y = x;
      while (y == x) y = static_cast<std::int32_t>(chain_rng.index(static_cast<std::size_t>(n)));
      std::int32_t z = y;
      while (z == y) z = draw_endpoint();
      if (edge_seen.insert(ekey(0, x, y)).second) {
        ra_edges.push_back({x, y});
        ra_by_obj[y].push_back(x);
      }
      if (edge_seen.insert(ekey(1, y, z)).second) {
        rb_edges.push_back({y, z});
        rb_by_subj[y].push_back(z);
      }
    }

    // Composed pairs by exhaustive join (includes accidental cross-chain
    // compositions, so the planted rate stays exact on the joint graph).
    std::map<std::pair<std::int32_t, std::int32_t>, bool> composed;
    for (const auto& [y, xs] : ra_by_obj) {
      auto it = rb_by_subj.find(y);
      if (it == rb_by_subj.end()) continue;
      for (std::int32_t x : xs)
        for (std::int32_t z : it->second) composed[{x, z}] = true;
    }
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    pairs.reserve(composed.size());
    for (const auto& [p, _] : composed) pairs.push_back(p);
    fisher_yates(pairs, part_rng);

    auto np = pairs.size();
    auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                               static_cast<double>(np) * config.heldout_fraction / 2)));
    auto n_valid = n_test;
    if (np < n_test + n_valid + 2) throw ConfigError("scenario too small: not enough composed pairs");
    std::vector<std::pair<std::int32_t, std::int32_t>> test_pairs(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::pair<std::int32_t, std::int32_t>> valid_pairs(
        pairs.begin() + static_cast<std::ptrdiff_t>(n_test),
        pairs.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
    std::vector<std::pair<std::int32_t, std::int32_t>> rest(
        pairs.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), pairs.end());
    // Floor keeps the share of composed pairs carrying a head at or above the
    // requested confidence even after rounding.
    auto n_noise = static_cast<std::size_t>(std::floor(
        (1.0 - config.planted_confidence) * static_cast<double>(rest.size())));
    std::vector<std::pair<std::int32_t, std::int32_t>> head_pairs(rest.begin() + static_cast<std::ptrdiff_t>(n_noise),
                                                                  rest.end());
    if (head_pairs.empty()) throw ConfigError("scenario too small: no training heads left");

    std::set<std::pair<std::int32_t, std::int32_t>> held(test_pairs.begin(), test_pairs.end());
    held.insert(valid_pairs.begin(), valid_pairs.end());

    // Background: full chains, rc heads except held-out pairs (either
    // orientation, so the leakage audit stays at zero).
    for (const Edge& e : ra_edges) sc.background.add_triplet({bg_ent(e.s), ra, bg_ent(e.o)});
    for (const Edge& e : rb_edges) sc.background.add_triplet({bg_ent(e.s), rb, bg_ent(e.o)});
    for (const auto& [x, z] : head_pairs)
      if (!held.contains({z, x})) sc.background.add_triplet({bg_ent(x), rc, bg_ent(z)});

    // Target: sparse mirror of the chains plus its own tc heads.
    std::vector<Edge> dropped_ra, dropped_rb;
    for (const Edge& e : ra_edges) {
      if (edge_rng.real01() < config.target_edge_keep)
        add_train(tg_ent(e.s), ta, tg_ent(e.o));
      else
        dropped_ra.push_back(e);
    }
    for (const Edge& e : rb_edges) {
      if (edge_rng.real01() < config.target_edge_keep)
        add_train(tg_ent(e.s), tb, tg_ent(e.o));
      else
        dropped_rb.push_back(e);
    }
    for (const auto& [x, z] : head_pairs) add_train(tg_ent(x), tc, tg_ent(z));

    auto add_heldout = [&](const std::vector<std::pair<std::int32_t, std::int32_t>>& ps,
                           std::vector<Triplet>& part) {
      for (const auto& [x, z] : ps) {
        Triplet t{tg_ent(x), tc, tg_ent(z)};
        if (sc.target.add_triplet(t)) part.push_back(t);
      }
    };
    add_heldout(valid_pairs, sc.split.valid);
    add_heldout(test_pairs, sc.split.test);

    // Coverage repair: any held-out endpoint missing from train gets one of
    // its dropped chain edges restored.
    std::unordered_set<std::int32_t> covered;
    for (const auto& t : sc.split.train) {
      covered.insert(t.s);
      covered.insert(t.o);
    }
    auto repair = [&](std::int32_t ent_idx) {
      std::int32_t id = tg_ent(ent_idx);
      if (covered.contains(id)) return;
      for (const Edge& e : dropped_ra)
        if (e.s == ent_idx || e.o == ent_idx) {
          add_train(tg_ent(e.s), ta, tg_ent(e.o));
          covered.insert(tg_ent(e.s));
          covered.insert(tg_ent(e.o));
          return;
        }
      for (const Edge& e : dropped_rb)
        if (e.s == ent_idx || e.o == ent_idx) {
          add_train(tg_ent(e.s), tb, tg_ent(e.o));
          covered.insert(tg_ent(e.s));
          covered.insert(tg_ent(e.o));
          return;
        }
      throw DataError("scenario repair failed: entity has no chain edge");
    };
    for (const auto& ps : {valid_pairs, test_pairs})
      for (const auto& [x, z] : ps) {
        repair(x);
        repair(z);
      }
  }

  // Alignment over the same index subset the chain endpoints were drawn from.
  sc.alignment.left_kg = sc.background.name;
  sc.alignment.right_kg = sc.target.name;
  for (std::size_t i = 0; i < n_aligned; ++i) {
    auto b = sc.background.entities.find(ent_name('b', align_order[i]));
    auto t = sc.target.entities.find(ent_name('t', align_order[i]));
    if (b && t) sc.alignment.add(*b, *t);
  }

  validate_split(sc.target, sc.split);

  // Audit: derivability of every test triplet by exhaustive background
  // 2-hop join through the alignment.
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> tgt_to_bg;
  for (auto [l, r] : sc.alignment.pairs) tgt_to_bg[r].push_back(l);
  sc.audit.test_total = static_cast<std::int64_t>(sc.split.test.size());
  for (std::size_t f = 0; f < fams.size(); ++f) {
    const Family& fam = fams[f];
    auto ra = *sc.background.relations.find(fam.ra);
    auto rb = *sc.background.relations.find(fam.rb);
    auto tc = *sc.target.relations.find(fam.tc);
    std::unordered_set<std::uint64_t> two_hop;
    for (const auto& t1 : sc.background.triplets) {
      if (t1.r != ra) continue;
      for (const auto& t2 : sc.background.triplets)
        if (t2.r == rb && t2.s == t1.o)
          two_hop.insert((static_cast<std::uint64_t>(static_cast<std::uint32_t>(t1.s)) << 32) |
                         static_cast<std::uint32_t>(t2.o));
    }
    for (const auto& t : sc.split.test) {
      if (t.r != tc) continue;
      bool derivable = false;
      auto si = tgt_to_bg.find(t.s);
      auto oi = tgt_to_bg.find(t.o);
      if (si != tgt_to_bg.end() && oi != tgt_to_bg.end())
        for (std::int32_t bs : si->second) {
          for (std::int32_t bo : oi->second)
            if (two_hop.contains((static_cast<std::uint64_t>(static_cast<std::uint32_t>(bs)) << 32) |
                                 static_cast<std::uint32_t>(bo))) {
              derivable = true;
              break;
            }
          if (derivable) break;
        }
      if (derivable) ++sc.audit.derivable_test;
    }
  }

  sc.audit.leakage_deletions =
      remove_leakage(sc.background, sc.split, sc.alignment, &sc.relation_map, true).report.deleted;

  // Planted family-0 rule measured on the merged joint graph with plain
  // nested joins (independent of the rule miner).
  {
    MultiSourceCollection coll;
    coll.kgs = {sc.background, sc.target};
    coll.alignments = {sc.alignment};
    MergeResult mr = merge_aligned(coll);
    auto ra = mr.relation_map[0][static_cast<std::size_t>(*sc.background.relations.find(fams[0].ra))];
    auto rb = mr.relation_map[0][static_cast<std::size_t>(*sc.background.relations.find(fams[0].rb))];
    auto tc = mr.relation_map[1][static_cast<std::size_t>(*sc.target.relations.find(fams[0].tc))];
    std::unordered_set<std::uint64_t> body, head;
    for (const auto& t1 : mr.merged.triplets) {
      if (t1.r != ra) continue;
      for (const auto& t2 : mr.merged.triplets)
        if (t2.r == rb && t2.s == t1.o)
          body.insert((static_cast<std::uint64_t>(static_cast<std::uint32_t>(t1.s)) << 32) |
                      static_cast<std::uint32_t>(t2.o));
    }
    for (const auto& t : mr.merged.triplets)
      if (t.r == tc)
        head.insert((static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.s)) << 32) |
                    static_cast<std::uint32_t>(t.o));
    for (std::uint64_t k : body)
      if (head.contains(k)) ++sc.audit.rule_support;
    sc.audit.rule_body_support = static_cast<std::int64_t>(body.size());
    sc.audit.planted_rule_confidence =
        body.empty() ? 0.0
                     : static_cast<double>(sc.audit.rule_support) / static_cast<double>(body.size());
  }
  return sc;
}

void save_scenario(const TransferScenario& sc, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_triplets_tsv(sc.background, sc.background.triplets, dir + "/background.tsv");
  write_triplets_tsv(sc.target, sc.split.train, dir + "/target_train.tsv");
  write_triplets_tsv(sc.target, sc.split.valid, dir + "/target_valid.tsv");
  write_triplets_tsv(sc.target, sc.split.test, dir + "/target_test.tsv");
  write_alignment_tsv(sc.alignment, sc.background, sc.target, dir + "/alignment.tsv");
  {
    std::ofstream out(dir + "/relation_map.tsv", std::ios::trunc);
    for (auto [rc, tc] : sc.relation_map)
      out << sc.background.relations.name(rc) << '\t' << sc.target.relations.name(tc) << '\n';
  }
  Manifest m;
  m.set("format", "kgt.scenario");
  m.set("version", "1");
  m.set("seed", std::to_string(sc.config.seed));
  m.set("n_entities", std::to_string(sc.config.n_entities));
  m.set("n_relations", std::to_string(sc.config.n_relations));
  m.set("alignment_fraction", std::to_string(sc.config.alignment_fraction));
  m.set("planted_confidence", std::to_string(sc.config.planted_confidence));
  m.set("background_triplets", std::to_string(sc.background.triplets.size()));
  m.set("train", std::to_string(sc.split.train.size()));
  m.set("valid", std::to_string(sc.split.valid.size()));
  m.set("test", std::to_string(sc.split.test.size()));
  m.set("aligned_pairs", std::to_string(sc.alignment.pairs.size()));
  m.set("test_derivable", std::to_string(sc.audit.derivable_test));
  m.set("leakage_deletions", std::to_string(sc.audit.leakage_deletions));
  m.set("planted_rule_confidence", std::to_string(sc.audit.planted_rule_confidence));
  m.set("rule_support", std::to_string(sc.audit.rule_support));
  m.set("rule_body_support", std::to_string(sc.audit.rule_body_support));
  save_manifest(m, dir + "/audit.txt");
}

}  // namespace kgt
