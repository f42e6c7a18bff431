#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kgt/nn.hpp"
#include "kgt/tape.hpp"

namespace kgt {

struct NceConfig {
  int k = 10;
  // Loss for a negative draw: false -> -log(1 - p) (canonical NCE);
  // true -> 1 - log p (literal variant; note its negative term rewards,
  // not penalizes, high negative scores — kept only for comparison).
  bool printed_form = false;
};

inline void validate_nce_config(const NceConfig& cfg) {
  if (cfg.k < 0) throw ConfigError("nce.k must be nonnegative");
}

// Sampling table over a vocabulary with mass proportional to count^(3/4).
class NegativeDistribution {
 public:
  explicit NegativeDistribution(const std::vector<std::int64_t>& counts) {
    cum_.reserve(counts.size());
    double total = 0.0;
    for (auto c : counts) {
      if (c < 0) throw DataError("negative frequency count");
      total += std::pow(static_cast<double>(c), 0.75);
      cum_.push_back(total);
    }
    if (cum_.empty() || total <= 0.0)
      throw DataError("negative-sampling distribution has no mass");
    total_ = total;
  }

  std::size_t size() const { return cum_.size(); }

  double probability(std::int32_t id) const { return mass(id) / total_; }

  std::int32_t sample(Rng& rng) const {
    double u = rng.real01() * total_;
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    if (it == cum_.end()) --it;  // guard the u == total_ edge
    return static_cast<std::int32_t>(it - cum_.begin());
  }

  std::int32_t sample_excluding(Rng& rng, std::int32_t excluded) const {
    bool excludable = excluded >= 0 && excluded < static_cast<std::int32_t>(cum_.size());
    if (excludable && total_ - mass(excluded) <= 0.0)
      throw DataError("cannot sample a negative: excluded element holds all the mass");
    for (;;) {
      std::int32_t draw = sample(rng);
      if (!excludable || draw != excluded) return draw;
    }
  }

 private:
  double mass(std::int32_t id) const {
    auto i = static_cast<std::size_t>(id);
    return i == 0 ? cum_[0] : cum_[i] - cum_[i - 1];
  }

  std::vector<double> cum_;
  double total_ = 0.0;
};

// k independent draws per batch row, target excluded. Layout: [draw][row].
inline std::vector<std::vector<std::int32_t>> draw_negatives(
    const NegativeDistribution& dist, const std::vector<std::int32_t>& targets, int k, Rng& rng) {
  if (k > static_cast<int>(dist.size()) - 1)
    throw ConfigError("nce.k must be at most vocabulary size - 1");
  std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(k));
  for (auto& draw : out) {
    draw.reserve(targets.size());
    for (auto target : targets) draw.push_back(dist.sample_excluding(rng, target));
  }
  return out;
}

// Per-row NCE loss at one position (column vector, batch x 1):
//   softplus(-t.c) + sum_i softplus(n_i.c)            (canonical)
//   softplus(-t.c) + sum_i (1 + softplus(-n_i.c))     (printed variant)
// using -log sigmoid(z) = softplus(-z).
template <typename S>
Var<S> nce_position_loss(Var<S> table, Var<S> context, const std::vector<std::int32_t>& targets,
                         const std::vector<std::vector<std::int32_t>>& negatives,
                         bool printed_form) {
  Var<S> loss = softplus(neg(row_dot(rows_gather(table, targets), context)));
  for (const auto& draw : negatives) {
    Var<S> logit = row_dot(rows_gather(table, draw), context);
    Var<S> term = printed_form ? add_scalar(softplus(neg(logit)), S(1)) : softplus(logit);
    loss = add(loss, term);
  }
  return loss;
}

// Mean over the batch of the per-path loss: the sum over every position of
// the NCE prediction loss, with entity negatives at entity positions and
// relation negatives at relation positions.
template <typename S>
Var<S> nce_path_loss(Tape<S>& t, ParamBinding<S>& params, const EncoderConfig& encoder,
                     const PathBatch& batch, const NegativeDistribution& entity_dist,
                     const NegativeDistribution& relation_dist, const NceConfig& nce, bool train,
                     Rng& dropout_rng, Rng& negative_rng) {
  validate_nce_config(nce);
  std::vector<Var<S>> contexts = encode_contexts(t, params, encoder, batch, train, dropout_rng);
  Var<S> total{};
  for (int pos = 0; pos < batch.length; ++pos) {
    bool ent = is_entity_position(pos);
    const auto& dist = ent ? entity_dist : relation_dist;
    const auto& targets = batch.ids[static_cast<std::size_t>(pos)];
    auto negatives = draw_negatives(dist, targets, nce.k, negative_rng);
    Var<S> table = params[ent ? "entity_embeddings" : "relation_embeddings"];
    Var<S> rows = nce_position_loss(table, contexts[static_cast<std::size_t>(pos)], targets,
                                    negatives, nce.printed_form);
    total = (pos == 0) ? rows : add(total, rows);
  }
  return mean_all(total);
}

}  // namespace kgt
