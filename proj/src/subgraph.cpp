#include "kgt/subgraph.hpp"

#include <algorithm>
#include <cmath>

namespace kgt {

std::vector<std::size_t> weighted_sample_without_replacement(const std::vector<double>& weights,
                                                             std::size_t k, Rng& rng) {
  if (k > weights.size())
    throw NumericError("weighted sample: k exceeds population size");
  std::vector<std::pair<double, std::size_t>> keys(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) throw NumericError("weighted sample: weights must be positive");
    double u = rng.real01();
    // log(u)/w is a monotone spelling of u^(1/w); larger is better.
    keys[i] = {std::log(std::max(u, 1e-300)) / weights[i], i};
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = keys[i].second;
  return out;
}

LinkedSubgraph build_linked_subgraph(const KnowledgeGraph& background,
                                     const AlignmentSet& alignment, std::int64_t budget,
                                     std::uint64_t seed) {
  if (budget < 0) throw ConfigError("subgraph budget must be non-negative");
  if (alignment.left_kg != background.name)
    throw DataError("alignment left side '" + alignment.left_kg + "' is not the background graph '" +
                    background.name + "'");

  std::vector<bool> aligned(static_cast<std::size_t>(background.entities.size()), false);
  for (auto [l, r] : alignment.pairs) {
    (void)r;
    if (l < 0 || l >= background.entities.size())
      throw DataError("alignment references an unknown background entity");
    aligned[static_cast<std::size_t>(l)] = true;
  }

  LinkedSubgraph sg;
  sg.budget = budget;
  sg.popularity.counts.assign(static_cast<std::size_t>(background.entities.size()), 0);
  std::vector<Triplet> outer;  // full minus core
  for (const auto& t : background.triplets) {
    bool sa = aligned[static_cast<std::size_t>(t.s)];
    bool oa = aligned[static_cast<std::size_t>(t.o)];
    if (!sa && !oa) continue;
    sg.full.push_back(t);
    if (sa && oa) {
      sg.core.push_back(t);
      ++sg.popularity.counts[static_cast<std::size_t>(t.s)];
      ++sg.popularity.counts[static_cast<std::size_t>(t.o)];
    } else {
      outer.push_back(t);
    }
  }

  Rng rng(derive_seed(seed, 0x5b6));
  auto b = static_cast<std::size_t>(budget);
  if (sg.core.size() >= b) {
    // Uniform b-subset of the core (partial Fisher-Yates).
    std::vector<std::size_t> idx(sg.core.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t j = i + rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(b);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) sg.sampled.push_back(sg.core[i]);
  } else {
    sg.sampled = sg.core;
    std::size_t need = std::min(b - sg.core.size(), outer.size());
    sg.shortfall = static_cast<std::int64_t>(need);
    if (need > 0) {
      std::vector<double> w(outer.size());
      for (std::size_t i = 0; i < outer.size(); ++i)
        w[i] = static_cast<double>(std::max<std::int64_t>(sg.popularity.triplet_popularity(outer[i]), 1));
      auto picked = weighted_sample_without_replacement(w, need, rng);
      std::sort(picked.begin(), picked.end());
      for (std::size_t i : picked) sg.sampled.push_back(outer[i]);
    }
  }

  std::vector<bool> in_sub(static_cast<std::size_t>(background.entities.size()), false);
  for (const auto& t : sg.sampled) {
    in_sub[static_cast<std::size_t>(t.s)] = true;
    in_sub[static_cast<std::size_t>(t.o)] = true;
  }
  for (std::int32_t e = 0; e < background.entities.size(); ++e)
    if (in_sub[static_cast<std::size_t>(e)]) sg.entities.push_back(e);
  for (auto [l, r] : alignment.pairs)
    if (in_sub[static_cast<std::size_t>(l)]) sg.pairs.emplace_back(l, r);
  return sg;
}

}  // namespace kgt
