#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgt/checkpoint.hpp"
#include "kgt/nn.hpp"
#include "kgt/objective.hpp"
#include "kgt/tape.hpp"

namespace kgt {

struct DistillConfig {
  double alpha = 0.3;  // network-distillation weight
  double beta = 0.3;   // prediction-distillation weight
  int patience = 3;    // non-improving validation checks tolerated
  int val_period = 2;  // epochs between validation checks
};

inline void validate_distill_config(const DistillConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.beta < 0.0)
    throw ConfigError("distill.alpha and distill.beta must be nonnegative");
  if (cfg.patience < 0) throw ConfigError("distill.patience must be nonnegative");
  if (cfg.val_period <= 0) throw ConfigError("distill.val_period must be positive");
}

namespace detail {

inline bool is_layer_parameter(const std::string& name) {
  return name.rfind("lstm.", 0) == 0 || name.rfind("rsn.", 0) == 0 || name.rfind("tf.", 0) == 0;
}

}  // namespace detail

// Learnable maps that reconcile student and teacher spaces: "w_feat"
// (d_teacher x d_student) for input embeddings, and one "net.<name>" map per
// matched layer parameter, applied by left multiplication. Square maps start
// at the identity so an architecture-identical copy distills at zero loss.
template <typename S>
struct KdBridge {
  ParameterSet<S> transforms;
  std::vector<std::string> matched;  // layer parameters shared by both models
};

template <typename S>
KdBridge<S> init_kd_transforms(const ParameterSet<S>& teacher, const ParameterSet<S>& student,
                               Eigen::Index teacher_dim, Eigen::Index student_dim,
                               std::uint64_t seed) {
  KdBridge<S> bridge;
  Rng rng(seed);
  auto make = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto& m = bridge.transforms.add(name, rows, cols);
    if (rows == cols)
      m.setIdentity();
    else
      detail::xavier_fill(m, static_cast<double>(rows), static_cast<double>(cols), rng);
  };
  make("w_feat", teacher_dim, student_dim);
  for (const auto& name : student.names()) {
    if (!detail::is_layer_parameter(name) || !teacher.has(name)) continue;
    const auto& ts = teacher.at(name);
    const auto& ss = student.at(name);
    bool t_vec = ts.rows() == 1, s_vec = ss.rows() == 1;
    if (t_vec != s_vec)
      throw ConfigError("network distillation cannot reconcile parameter '" + name +
                        "': vector/matrix mismatch");
    if (t_vec) {
      make("net." + name, ts.cols(), ss.cols());
    } else {
      if (ts.cols() != ss.cols())
        throw ConfigError("network distillation cannot reconcile parameter '" + name +
                          "': column count differs (left multiplication only)");
      make("net." + name, ts.rows(), ss.rows());
    }
    bridge.matched.push_back(name);
  }
  return bridge;
}

// Mean MSE between mapped student embeddings and the teacher's, plus mean MSE
// tying the two student embeddings of each aligned pair. The teacher table
// enters as a constant, so no gradient reaches it.
template <typename S>
Var<S> feature_kd_loss(Tape<S>& t, ParamBinding<S>& student, ParamBinding<S>& transforms,
                       const typename Tape<S>::Mat& teacher_entities,
                       const std::vector<std::int32_t>& student_ids,
                       const std::vector<std::int32_t>& teacher_ids,
                       const std::vector<std::pair<std::int32_t, std::int32_t>>& aligned_pairs) {
  if (student_ids.size() != teacher_ids.size())
    throw DataError("feature distillation: id list size mismatch");
  Var<S> loss = scalar_constant(t, S(0));
  if (!student_ids.empty()) {
    typename Tape<S>::Mat target(static_cast<Eigen::Index>(teacher_ids.size()),
                                 teacher_entities.cols());
    for (std::size_t i = 0; i < teacher_ids.size(); ++i) {
      if (teacher_ids[i] < 0 || teacher_ids[i] >= teacher_entities.rows())
        throw DataError("feature distillation: entity has no teacher embedding");
      target.row(static_cast<Eigen::Index>(i)) = teacher_entities.row(teacher_ids[i]);
    }
    Var<S> mapped = matmul(rows_gather(student["entity_embeddings"], student_ids),
                           transpose(transforms["w_feat"]));
    loss = add(loss, mse(mapped, constant(t, std::move(target))));
  }
  if (!aligned_pairs.empty()) {
    std::vector<std::int32_t> firsts, seconds;
    firsts.reserve(aligned_pairs.size());
    seconds.reserve(aligned_pairs.size());
    for (auto [a, b] : aligned_pairs) {
      firsts.push_back(a);
      seconds.push_back(b);
    }
    loss = add(loss, mse(rows_gather(student["entity_embeddings"], firsts),
                         rows_gather(student["entity_embeddings"], seconds)));
  }
  return loss;
}

// (1/|matched|) sum of MSE(W_name . theta_student, theta_teacher); row-vector
// parameters are treated as columns so their maps are (d_t x d_s).
template <typename S>
Var<S> network_kd_loss(Tape<S>& t, ParamBinding<S>& student, ParamBinding<S>& transforms,
                       const ParameterSet<S>& teacher, const std::vector<std::string>& matched) {
  if (matched.empty()) return scalar_constant(t, S(0));
  Var<S> total{};
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const std::string& name = matched[i];
    Var<S> w = transforms["net." + name];
    Var<S> stud = student[name];
    Var<S> term;
    if (teacher.at(name).rows() == 1) {
      term = mse(matmul(w, transpose(stud)),
                 constant(t, typename Tape<S>::Mat(teacher.at(name).transpose())));
    } else {
      term = mse(matmul(w, stud), constant(t, teacher.at(name)));
    }
    total = (i == 0) ? term : add(total, term);
  }
  return scale(total, S(1) / static_cast<S>(matched.size()));
}

// Teacher prediction distribution over the candidate entities at the final
// path position: sigmoid scores normalized to sum to one. Computed without
// gradients and cacheable (the teacher is frozen).
template <typename S>
typename Tape<S>::Mat teacher_prediction_matrix(const Checkpoint<S>& teacher,
                                                const PathBatch& batch,
                                                const std::vector<std::int32_t>& candidates) {
  if (candidates.empty()) throw DataError("prediction distillation: empty candidate set");
  Tape<S> t;
  ParamBinding<S> binding(t, teacher.params, false);
  Rng rng(0);
  Var<S> ctx = encode_context_at(t, binding, teacher.encoder, batch, batch.length - 1, false, rng);
  const auto& table = teacher.params.at("entity_embeddings");
  typename Tape<S>::Mat cand(static_cast<Eigen::Index>(candidates.size()), table.cols());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 0 || candidates[i] >= table.rows())
      throw DataError("prediction distillation: candidate outside teacher vocabulary");
    cand.row(static_cast<Eigen::Index>(i)) = table.row(candidates[i]);
  }
  typename Tape<S>::Mat probs = ctx.val() * cand.transpose();
  probs = probs.unaryExpr([](S x) {
    if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
    S e = std::exp(x);
    return e / (S(1) + e);
  });
  for (Eigen::Index r = 0; r < probs.rows(); ++r) probs.row(r) /= probs.row(r).sum();
  return probs;
}

// Student counterpart, on the tape so gradients flow.
template <typename S>
Var<S> student_prediction_rows(Tape<S>& t, ParamBinding<S>& student, const EncoderConfig& encoder,
                               const PathBatch& batch, const std::vector<std::int32_t>& candidates,
                               bool train, Rng& dropout_rng) {
  if (candidates.empty()) throw DataError("prediction distillation: empty candidate set");
  Var<S> ctx = encode_context_at(t, student, encoder, batch, batch.length - 1, train, dropout_rng);
  Var<S> sig = sigmoid(matmul(ctx, transpose(rows_gather(student["entity_embeddings"], candidates))));
  return mul_colvec(sig, reciprocal(row_sum(sig)));
}

// Mean KL(teacher || student) per context row; student probabilities are
// floored at 1e-12 and zero teacher mass contributes nothing.
template <typename S>
Var<S> prediction_kd_loss(Tape<S>& t, const typename Tape<S>::Mat& teacher_probs,
                          Var<S> student_probs) {
  if (teacher_probs.rows() != student_probs.rows() ||
      teacher_probs.cols() != student_probs.cols())
    throw DataError("prediction distillation: distribution shape mismatch");
  const S floor = S(1e-12);
  typename Tape<S>::Mat plogp(teacher_probs.rows(), 1);
  for (Eigen::Index r = 0; r < teacher_probs.rows(); ++r) {
    S acc = S(0);
    for (Eigen::Index c = 0; c < teacher_probs.cols(); ++c) {
      S p = teacher_probs(r, c);
      if (p > S(0)) acc += p * std::log(p);
    }
    plogp(r, 0) = acc;
  }
  Var<S> cross = row_sum(cmul(constant(t, teacher_probs), log_floor(student_probs, floor)));
  return mean_all(sub(constant(t, std::move(plogp)), cross));
}

template <typename S>
Var<S> total_kd_loss(Var<S> l_feat, Var<S> l_net, Var<S> l_prob, double alpha, double beta) {
  return add(add(l_feat, scale(l_net, static_cast<S>(alpha))),
             scale(l_prob, static_cast<S>(beta)));
}

}  // namespace kgt
