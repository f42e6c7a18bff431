#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kgt/common.hpp"
#include "kgt/tape.hpp"

namespace kgt {

enum class EncoderKind { lstm, rsn, transformer };
enum class Precision { f32, f64 };

inline std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::lstm: return "lstm";
    case EncoderKind::rsn: return "rsn";
    case EncoderKind::transformer: return "transformer";
  }
  throw ConfigError("bad encoder kind");
}

inline EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "lstm") return EncoderKind::lstm;
  if (s == "rsn") return EncoderKind::rsn;
  if (s == "transformer") return EncoderKind::transformer;
  throw ConfigError("unknown encoder kind '" + s + "'");
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::rsn;
  int dim = 256;
  int layers = 1;
  int heads = 4;  // transformer only
  double dropout_rate = 0.2;
  int max_path_length = 7;  // transformer position-table size
  Precision precision = Precision::f32;
};

inline void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.dim <= 0) throw ConfigError("encoder.dim must be positive");
  if (cfg.layers <= 0) throw ConfigError("encoder.layers must be positive");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("encoder.dropout must be in [0,1)");
  if (cfg.kind == EncoderKind::transformer) {
    if (cfg.heads <= 0) throw ConfigError("encoder.heads must be positive");
    if (cfg.dim % cfg.heads != 0) throw ConfigError("encoder.dim must be divisible by heads");
    if (cfg.max_path_length < 3) throw ConfigError("encoder.max_path_length must be >= 3");
  }
}

// A batch of equal-length element-id sequences. Position parity selects the
// vocabulary: even positions are entities, odd positions are relations.
struct PathBatch {
  int length = 0;
  std::vector<std::vector<std::int32_t>> ids;  // [position][row]

  Eigen::Index rows() const { return ids.empty() ? 0 : static_cast<Eigen::Index>(ids[0].size()); }
};

inline bool is_entity_position(int pos) { return pos % 2 == 0; }

namespace detail {

template <typename S>
void xavier_fill(Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& m, double fan_in,
                 double fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
}

}  // namespace detail

// Parameters are registered in a fixed order and filled with Xavier-uniform
// draws in registration order, so a seed pins every weight. Weight matrices
// act on row-vector batches by right multiplication: y = x W + b. Embedding
// tables and d-vectors use fan_in = fan_out = d.
template <typename S>
ParameterSet<S> init_parameters(const EncoderConfig& cfg, Eigen::Index n_entities,
                                Eigen::Index n_relations, std::uint64_t seed) {
  validate_encoder_config(cfg);
  if (n_entities <= 0) throw ConfigError("entity vocabulary is empty");
  if (n_relations <= 0) throw ConfigError("relation vocabulary is empty");
  ParameterSet<S> p;
  Rng rng(seed);
  Eigen::Index d = cfg.dim;
  auto emb = [&](const std::string& name, Eigen::Index rows) {
    auto& m = p.add(name, rows, d);
    detail::xavier_fill(m, static_cast<double>(d), static_cast<double>(d), rng);
  };
  auto weight = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto& m = p.add(name, rows, cols);
    detail::xavier_fill(m, static_cast<double>(rows), static_cast<double>(cols), rng);
  };
  auto zeros = [&](const std::string& name, Eigen::Index cols) { p.add(name, 1, cols); };
  auto ones = [&](const std::string& name, Eigen::Index cols) {
    p.add(name, 1, cols).setOnes();
  };

  emb("entity_embeddings", n_entities);
  emb("relation_embeddings", n_relations);
  emb("begin_of_path", 1);
  if (cfg.kind == EncoderKind::lstm || cfg.kind == EncoderKind::rsn) {
    for (int l = 0; l < cfg.layers; ++l) {
      std::string base = "lstm." + std::to_string(l) + ".";
      for (const char* g : {"i", "f", "o", "g"}) {
        weight(base + "w_x_" + g, d, d);
        weight(base + "w_h_" + g, d, d);
        zeros(base + "b_" + g, d);
      }
    }
    if (cfg.kind == EncoderKind::rsn) {
      weight("rsn.w1", d, d);
      weight("rsn.w2", d, d);
    }
  } else {
    emb("mask_token", 1);
    emb("position_embeddings", cfg.max_path_length);
    Eigen::Index f = 4 * d;
    for (int l = 0; l < cfg.layers; ++l) {
      std::string base = "tf." + std::to_string(l) + ".";
      for (const char* w : {"q", "k", "v", "o"}) {
        weight(base + "attn.w_" + w, d, d);
        zeros(base + "attn.b_" + w, d);
      }
      ones(base + "ln1.gamma", d);
      zeros(base + "ln1.beta", d);
      weight(base + "ffn.w1", d, f);
      zeros(base + "ffn.b1", f);
      weight(base + "ffn.w2", f, d);
      zeros(base + "ffn.b2", d);
      ones(base + "ln2.gamma", d);
      zeros(base + "ln2.beta", d);
    }
  }
  return p;
}

template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, S eps = S(1e-6)) {
  Var<S> centered = sub_colvec(x, row_mean(x));
  Var<S> inv_std = reciprocal(sqrt_(add_scalar(row_mean(square(centered)), eps)));
  return add_rowvec(mul_rowvec(mul_colvec(centered, inv_std), gamma), beta);
}

template <typename S>
Var<S> linear(ParamBinding<S>& p, Var<S> x, const std::string& w, const std::string& b) {
  return add_rowvec(matmul(x, p[w]), p[b]);
}

namespace detail {

template <typename S>
Var<S> gather_element(Tape<S>& t, ParamBinding<S>& p, const PathBatch& batch, int pos) {
  (void)t;
  const char* table = is_entity_position(pos) ? "entity_embeddings" : "relation_embeddings";
  return rows_gather(p[table], batch.ids[static_cast<std::size_t>(pos)]);
}

template <typename S>
struct RecurrentStates {
  std::vector<Var<S>> top;     // [t+1]; top[i] = top-layer h after consuming input i
  std::vector<Var<S>> inputs;  // [t]; raw element embeddings
};

// Stacked LSTM over (begin-of-path, e_0, ..., e_{t-1}). Gates i/f/o are
// sigmoids, the candidate is a one-layer tanh MLP of (h_{t-1}, x_t), and the
// state starts at zero so top[0] is the learned begin-of-path state.
template <typename S>
RecurrentStates<S> run_recurrent(Tape<S>& t, ParamBinding<S>& p, const EncoderConfig& cfg,
                                 const PathBatch& batch, bool train, Rng& rng) {
  Eigen::Index b = batch.rows();
  Eigen::Index d = cfg.dim;
  RecurrentStates<S> out;
  out.inputs.reserve(static_cast<std::size_t>(batch.length));
  for (int pos = 0; pos < batch.length; ++pos)
    out.inputs.push_back(gather_element(t, p, batch, pos));

  std::vector<Var<S>> seq;
  seq.reserve(static_cast<std::size_t>(batch.length) + 1);
  seq.push_back(broadcast_row(p["begin_of_path"], b));
  for (auto& x : out.inputs) seq.push_back(x);

  using Mat = typename Tape<S>::Mat;
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = "lstm." + std::to_string(l) + ".";
    Var<S> h = constant(t, Mat::Zero(b, d));
    Var<S> c = constant(t, Mat::Zero(b, d));
    std::vector<Var<S>> next;
    next.reserve(seq.size());
    for (auto& x_raw : seq) {
      Var<S> x = dropout(x_raw, cfg.dropout_rate, train, rng);
      auto gate = [&](const char* g) {
        return add(add(matmul(x, p[base + "w_x_" + g]), matmul(h, p[base + "w_h_" + g])),
                   broadcast_row(p[base + "b_" + g], b));
      };
      Var<S> gi = sigmoid(gate("i"));
      Var<S> gf = sigmoid(gate("f"));
      Var<S> go = sigmoid(gate("o"));
      Var<S> gg = tanh_(gate("g"));
      c = add(cmul(gf, c), cmul(gi, gg));
      h = cmul(go, tanh_(c));
      next.push_back(h);
    }
    seq = std::move(next);
  }
  out.top = std::move(seq);
  return out;
}

// Context for predicting element `pos` from its prefix: the top state after
// consuming pos elements. RSN rewrites relation-position states so the
// subject embedding reaches the object prediction directly.
template <typename S>
Var<S> recurrent_context(ParamBinding<S>& p, const EncoderConfig& cfg,
                         const RecurrentStates<S>& st, int pos) {
  Var<S> h = st.top[static_cast<std::size_t>(pos)];
  if (cfg.kind != EncoderKind::rsn || pos == 0) return h;
  int last = pos - 1;  // index of the last consumed element
  if (is_entity_position(last)) return h;
  return add(matmul(h, p["rsn.w1"]),
             matmul(st.inputs[static_cast<std::size_t>(last - 1)], p["rsn.w2"]));
}

// Per-position multi-head self-attention followed by the output projection.
// Attention is within a path, across positions; heads are column slices.
template <typename S>
std::vector<Var<S>> multi_head_attention(ParamBinding<S>& p, const std::string& base,
                                         const std::vector<Var<S>>& xs, int heads) {
  int tlen = static_cast<int>(xs.size());
  Eigen::Index d = xs[0].cols();
  Eigen::Index dh = d / heads;
  S inv_scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
  std::vector<Var<S>> q, k, v;
  for (auto& x : xs) {
    q.push_back(linear(p, x, base + "attn.w_q", base + "attn.b_q"));
    k.push_back(linear(p, x, base + "attn.w_k", base + "attn.b_k"));
    v.push_back(linear(p, x, base + "attn.w_v", base + "attn.b_v"));
  }
  std::vector<Var<S>> out;
  out.reserve(xs.size());
  for (int i = 0; i < tlen; ++i) {
    std::vector<Var<S>> head_outs;
    for (int h = 0; h < heads; ++h) {
      Var<S> qi = cols_slice(q[static_cast<std::size_t>(i)], h * dh, dh);
      std::vector<Var<S>> scores;
      for (int j = 0; j < tlen; ++j)
        scores.push_back(scale(
            row_dot(qi, cols_slice(k[static_cast<std::size_t>(j)], h * dh, dh)), inv_scale));
      Var<S> weights = softmax_rows(concat_cols(scores));  // (b, t)
      Var<S> acc{};
      for (int j = 0; j < tlen; ++j) {
        Var<S> term = mul_colvec(cols_slice(v[static_cast<std::size_t>(j)], h * dh, dh),
                                 cols_slice(weights, j, 1));
        acc = (j == 0) ? term : add(acc, term);
      }
      head_outs.push_back(acc);
    }
    Var<S> merged = (heads == 1) ? head_outs[0] : concat_cols(head_outs);
    out.push_back(add_rowvec(matmul(merged, p[base + "attn.w_o"]), p[base + "attn.b_o"]));
  }
  return out;
}

// One forward pass with the element at masked_pos replaced by the mask token;
// returns the final representation at the masked position (its context: every
// other element attends in). Post-norm residual blocks, ReLU feed-forward.
template <typename S>
Var<S> transformer_masked_context(Tape<S>& t, ParamBinding<S>& p, const EncoderConfig& cfg,
                                  const PathBatch& batch, int masked_pos, bool train, Rng& rng) {
  if (masked_pos < 0 || masked_pos >= batch.length)
    throw DataError("masked position out of range");
  if (batch.length > cfg.max_path_length)
    throw DataError("path longer than encoder.max_path_length");
  Eigen::Index b = batch.rows();
  std::vector<Var<S>> xs;
  xs.reserve(static_cast<std::size_t>(batch.length));
  for (int pos = 0; pos < batch.length; ++pos) {
    Var<S> x = (pos == masked_pos) ? broadcast_row(p["mask_token"], b)
                                   : gather_element(t, p, batch, pos);
    xs.push_back(add_rowvec(x, rows_gather(p["position_embeddings"],
                                           std::vector<std::int32_t>{
                                               static_cast<std::int32_t>(pos)})));
  }
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = "tf." + std::to_string(l) + ".";
    std::vector<Var<S>> attn = multi_head_attention(p, base, xs, cfg.heads);
    for (int i = 0; i < batch.length; ++i) {
      auto idx = static_cast<std::size_t>(i);
      Var<S> y = layer_norm(add(xs[idx], dropout(attn[idx], cfg.dropout_rate, train, rng)),
                            p[base + "ln1.gamma"], p[base + "ln1.beta"]);
      Var<S> f = linear(p, relu(linear(p, y, base + "ffn.w1", base + "ffn.b1")),
                        base + "ffn.w2", base + "ffn.b2");
      xs[idx] = layer_norm(add(y, dropout(f, cfg.dropout_rate, train, rng)),
                           p[base + "ln2.gamma"], p[base + "ln2.beta"]);
    }
  }
  return xs[static_cast<std::size_t>(masked_pos)];
}

}  // namespace detail

// Context representation for predicting the element at `pos`: recurrent
// encoders use the state after the prefix (the begin-of-path state at pos 0);
// the transformer uses a masked forward at pos.
template <typename S>
Var<S> encode_context_at(Tape<S>& t, ParamBinding<S>& p, const EncoderConfig& cfg,
                         const PathBatch& batch, int pos, bool train, Rng& rng) {
  if (pos < 0 || pos >= batch.length) throw DataError("context position out of range");
  if (cfg.kind == EncoderKind::transformer)
    return detail::transformer_masked_context(t, p, cfg, batch, pos, train, rng);
  auto st = detail::run_recurrent(t, p, cfg, batch, train, rng);
  return detail::recurrent_context(p, cfg, st, pos);
}

// Contexts for every position of the batch (one recurrent pass; one masked
// transformer pass per position).
template <typename S>
std::vector<Var<S>> encode_contexts(Tape<S>& t, ParamBinding<S>& p, const EncoderConfig& cfg,
                                    const PathBatch& batch, bool train, Rng& rng) {
  std::vector<Var<S>> out;
  out.reserve(static_cast<std::size_t>(batch.length));
  if (cfg.kind == EncoderKind::transformer) {
    for (int pos = 0; pos < batch.length; ++pos)
      out.push_back(detail::transformer_masked_context(t, p, cfg, batch, pos, train, rng));
    return out;
  }
  auto st = detail::run_recurrent(t, p, cfg, batch, train, rng);
  for (int pos = 0; pos < batch.length; ++pos)
    out.push_back(detail::recurrent_context(p, cfg, st, pos));
  return out;
}

// Query context for (s, r, ?): a length-3 path whose final position is the
// prediction target. The placeholder id at the masked/unvisited slot is
// never read.
template <typename S>
Var<S> encode_query_contexts(Tape<S>& t, ParamBinding<S>& p, const EncoderConfig& cfg,
                             const std::vector<std::int32_t>& subjects,
                             const std::vector<std::int32_t>& relations) {
  if (subjects.size() != relations.size())
    throw DataError("query batch: subject/relation count mismatch");
  PathBatch batch;
  batch.length = 3;
  batch.ids = {subjects, relations, std::vector<std::int32_t>(subjects.size(), 0)};
  Rng rng(0);
  return encode_context_at(t, p, cfg, batch, 2, false, rng);
}

}  // namespace kgt
