#pragma once

// Shared helpers for the unit and acceptance suites. Everything here is an
// independent re-derivation of the behavior under test: brute-force joins,
// scan-based filtering, sort-based ranking, and a generic central-difference
// gradient probe. None of it calls back into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "kgt/kg.hpp"
#include "kgt/rules.hpp"
#include "kgt/tape.hpp"

namespace testutil {

using kgt::KnowledgeGraph;
using kgt::Triplet;

// Self-cleaning scratch directory under the system temp root.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("kgt-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- graph builders ---------------------------------------------------------

struct TripleSpec {
  std::string s, r, o;
};

inline KnowledgeGraph make_kg(const std::string& name, const std::vector<TripleSpec>& triples) {
  KnowledgeGraph kg;
  kg.name = name;
  for (const auto& t : triples) {
    std::int32_t s = kg.entities.get_or_add(t.s);
    std::int32_t r = kg.add_relation(t.r);
    std::int32_t o = kg.entities.get_or_add(t.o);
    kg.add_triplet({s, r, o});
  }
  return kg;
}

// Connected random graph: a Hamiltonian cycle guarantees every entity appears,
// then extra uniformly random edges are layered on top.
inline KnowledgeGraph random_graph(std::int32_t n_entities, std::int32_t n_relations,
                                   std::int32_t extra_triplets, std::uint64_t seed,
                                   const std::string& name = "g") {
  kgt::Rng rng(seed);
  KnowledgeGraph kg;
  kg.name = name;
  for (std::int32_t i = 0; i < n_entities; ++i) kg.entities.get_or_add("e" + std::to_string(i));
  for (std::int32_t i = 0; i < n_relations; ++i) kg.add_relation("r" + std::to_string(i));
  for (std::int32_t i = 0; i < n_entities; ++i)
    kg.add_triplet({i, static_cast<std::int32_t>(rng.index(static_cast<std::size_t>(n_relations))),
                    (i + 1) % n_entities});
  std::int32_t added = 0;
  while (added < extra_triplets) {
    Triplet t{static_cast<std::int32_t>(rng.index(static_cast<std::size_t>(n_entities))),
              static_cast<std::int32_t>(rng.index(static_cast<std::size_t>(n_relations))),
              static_cast<std::int32_t>(rng.index(static_cast<std::size_t>(n_entities)))};
    if (kg.add_triplet(t)) ++added;
  }
  return kg;
}

// ---- finite differences -----------------------------------------------------

struct FdReport {
  double max_err = 0.0;       // |analytic - central difference| / scale
  std::string worst;          // "set#/param[row,col]" of the worst entry
  std::size_t entries = 0;
};

// Central-difference check of reverse-mode gradients over several parameter
// sets at once. `build` must be a pure function of the current parameter
// values: (tape, bindings) -> scalar loss Var. The error is relative for
// gradients above `rel_floor` in magnitude and absolute below it.
template <typename Build>
FdReport finite_difference_check(std::vector<kgt::ParameterSet<double>*> sets, Build build,
                                 double step = 1e-5, double rel_floor = 1e-3) {
  using kgt::ParamBinding;
  using kgt::Tape;
  // Analytic pass.
  std::vector<kgt::GradientSet<double>> grads;
  {
    Tape<double> tape;
    std::vector<ParamBinding<double>> bindings;
    bindings.reserve(sets.size());
    for (auto* s : sets) bindings.emplace_back(tape, *s, true);
    kgt::Var<double> loss = build(tape, bindings);
    tape.backward(loss.id);
    for (auto& b : bindings) grads.push_back(b.collect());
  }
  auto eval = [&]() {
    Tape<double> tape;
    std::vector<ParamBinding<double>> bindings;
    bindings.reserve(sets.size());
    for (auto* s : sets) bindings.emplace_back(tape, *s, false);
    kgt::Var<double> loss = build(tape, bindings);
    return loss.val()(0, 0);
  };
  FdReport rep;
  for (std::size_t si = 0; si < sets.size(); ++si) {
    kgt::ParameterSet<double>& p = *sets[si];
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
      auto& m = p.value(pi);
      const auto& g = grads[si].value(pi);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          double keep = m(r, c);
          m(r, c) = keep + step;
          double up = eval();
          m(r, c) = keep - step;
          double down = eval();
          m(r, c) = keep;
          double fd = (up - down) / (2.0 * step);
          double an = g(r, c);
          double scale = std::max({std::abs(fd), std::abs(an), rel_floor});
          double err = std::abs(fd - an) / scale;
          ++rep.entries;
          if (err > rep.max_err) {
            rep.max_err = err;
            rep.worst = "set" + std::to_string(si) + "/" + p.names()[pi] + "[" +
                        std::to_string(r) + "," + std::to_string(c) + "]";
          }
        }
    }
  }
  return rep;
}

// ---- brute-force filtered ranking -------------------------------------------

// Rank by sorting instead of counting: candidates completing a filter triplet
// with the query pair leave the list (except the gold), then the gold's rank
// is one plus the number of strictly better scores plus half its tie group
// (mean placement, rounded up). Filtering scans the raw triplet vector.
inline std::int64_t oracle_rank(const std::vector<double>& scores, std::int32_t gold,
                                std::int32_t query_s, std::int32_t query_r,
                                const std::vector<Triplet>& filter_triplets) {
  std::set<std::int32_t> removed;
  for (const auto& t : filter_triplets)
    if (t.s == query_s && t.r == query_r && t.o != gold) removed.insert(t.o);
  std::vector<double> kept;
  kept.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!removed.contains(static_cast<std::int32_t>(i))) kept.push_back(scores[i]);
  std::sort(kept.begin(), kept.end(), std::greater<double>());
  double g = scores[static_cast<std::size_t>(gold)];
  auto first = std::lower_bound(kept.begin(), kept.end(), g, std::greater<double>());
  auto last = std::upper_bound(kept.begin(), kept.end(), g, std::greater<double>());
  std::int64_t better = first - kept.begin();
  std::int64_t ties = last - first;  // includes the gold itself
  return better + (ties + 1) / 2;
}

// ---- brute-force rule mining --------------------------------------------------

// Exhaustive re-derivation of cross-namespace Horn rules by nested scans over
// the triplet list. Keyed by (head, shape, body1, body2) for comparison.
struct OracleRuleKey {
  std::int32_t head;
  int shape;
  std::int32_t body1, body2;
  auto operator<=>(const OracleRuleKey&) const = default;
};

struct OracleRule {
  std::int64_t support = 0;
  std::int64_t body_support = 0;
};

inline std::string oracle_namespace(const std::string& label) {
  auto pos = label.find(':');
  return pos == std::string::npos ? std::string() : label.substr(0, pos);
}

inline std::map<OracleRuleKey, OracleRule> oracle_mine(const KnowledgeGraph& joint, int max_body) {
  using Pair = std::pair<std::int32_t, std::int32_t>;
  std::int32_t nr = joint.relations.size();
  std::vector<std::set<Pair>> pairs(static_cast<std::size_t>(nr));
  for (const auto& t : joint.triplets) pairs[static_cast<std::size_t>(t.r)].insert({t.s, t.o});
  std::vector<std::string> ns(static_cast<std::size_t>(nr));
  for (std::int32_t r = 0; r < nr; ++r) ns[static_cast<std::size_t>(r)] =
      oracle_namespace(joint.relations.name(r));

  std::map<OracleRuleKey, OracleRule> out;
  auto emit = [&](std::int32_t head, kgt::RuleShape shape, std::int32_t b1, std::int32_t b2,
                  const std::set<Pair>& body) {
    if (body.empty()) return;
    std::int64_t support = 0;
    for (const auto& xy : body)
      if (pairs[static_cast<std::size_t>(head)].contains(xy)) ++support;
    out[{head, static_cast<int>(shape), b1, b2}] = {support,
                                                    static_cast<std::int64_t>(body.size())};
  };

  for (std::int32_t h = 0; h < nr; ++h) {
    for (std::int32_t b1 = 0; b1 < nr; ++b1) {
      if (ns[static_cast<std::size_t>(b1)] == ns[static_cast<std::size_t>(h)]) continue;
      std::set<Pair> direct, inverse;
      for (const auto& xy : pairs[static_cast<std::size_t>(b1)]) {
        direct.insert(xy);
        inverse.insert({xy.second, xy.first});
      }
      emit(h, kgt::RuleShape::direct, b1, -1, direct);
      emit(h, kgt::RuleShape::inverse, b1, -1, inverse);
      if (max_body < 2) continue;
      for (std::int32_t b2 = 0; b2 < nr; ++b2) {
        if (ns[static_cast<std::size_t>(b2)] != ns[static_cast<std::size_t>(b1)]) continue;
        std::set<Pair> chain, inv_chain, parent, child;
        for (const auto& t1 : joint.triplets) {
          if (t1.r != b1) continue;
          for (const auto& t2 : joint.triplets) {
            if (t2.r != b2) continue;
            if (t1.o == t2.s) chain.insert({t1.s, t2.o});        // b1(X,Z) b2(Z,Y)
            if (t1.s == t2.o) inv_chain.insert({t1.o, t2.s});    // b1(Z,X) b2(Y,Z)
            if (t1.s == t2.s) parent.insert({t1.o, t2.o});       // b1(Z,X) b2(Z,Y)
            if (t1.o == t2.o) child.insert({t1.s, t2.s});        // b1(X,Z) b2(Y,Z)
          }
        }
        emit(h, kgt::RuleShape::chain, b1, b2, chain);
        emit(h, kgt::RuleShape::inverse_chain, b1, b2, inv_chain);
        emit(h, kgt::RuleShape::common_parent, b1, b2, parent);
        emit(h, kgt::RuleShape::common_child, b1, b2, child);
      }
    }
  }
  return out;
}

}  // namespace testutil
