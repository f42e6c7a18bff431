#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgt/checkpoint.hpp"
#include "kgt/distill.hpp"
#include "kgt/eval.hpp"
#include "kgt/kg.hpp"
#include "kgt/nn.hpp"
#include "kgt/objective.hpp"
#include "kgt/optimizer.hpp"
#include "kgt/paths.hpp"
#include "kgt/subgraph.hpp"
#include "kgt/tape.hpp"

namespace kgt {

struct TrainConfig {
  int batch_size = 2048;
  int epochs = 50;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int resample_every = 0;  // 0: sample the corpus once up front
  double augment_cap_multiplier = 1.0;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (cfg.epochs < 0) throw ConfigError("train.epochs must be nonnegative");
  if (cfg.resample_every < 0) throw ConfigError("train.resample_every must be nonnegative");
  if (cfg.augment_cap_multiplier < 0.0)
    throw ConfigError("train.augment_cap_multiplier must be nonnegative");
  validate_adam_config(cfg.adam);
}

namespace seed_tag {
constexpr std::uint64_t init = 1, walk = 2, replace = 3, concat = 4, shuffle = 5, order = 6,
                        negatives = 7, dropout = 8, kd = 9, kd_shuffle = 10;
}

namespace detail {

// Contiguous id blocks per source graph; names carry "graph:" tags and the
// negative-sampling frequencies concatenate in the same order.
struct JointVocab {
  std::vector<std::int32_t> ent_off, rel_off;
  std::int32_t n_ent = 0, n_rel = 0;
  std::vector<std::string> entity_names, relation_names;
  std::vector<std::int64_t> ent_counts, rel_counts;
};

inline JointVocab build_joint_vocab(const std::vector<const KnowledgeGraph*>& kgs) {
  JointVocab v;
  for (const auto* kg : kgs) {
    v.ent_off.push_back(v.n_ent);
    v.rel_off.push_back(v.n_rel);
    v.n_ent += kg->entities.size();
    v.n_rel += kg->relations.size();
    for (const auto& n : kg->entities.names()) v.entity_names.push_back(kg->name + ":" + n);
    for (const auto& n : kg->relations.names()) v.relation_names.push_back(kg->name + ":" + n);
    FrequencyTable f = entity_frequencies(*kg);
    v.ent_counts.insert(v.ent_counts.end(), f.entity_counts.begin(), f.entity_counts.end());
    v.rel_counts.insert(v.rel_counts.end(), f.relation_counts.begin(), f.relation_counts.end());
  }
  return v;
}

inline void append_corpus(PathCorpus& dst, const PathCorpus& src) {
  auto len = static_cast<std::size_t>(src.length());
  for (std::size_t i = 0; i < src.size(); ++i)
    dst.append(src.elements().data() + i * len, src.tags().data() + i * len, src.provenance(i));
}

// Same-length corpora merge into one batching group; augmentation can change
// the length (concatenation), so a corpus set holds one group per length.
struct CorpusGroups {
  std::vector<PathCorpus> groups;
  std::size_t total = 0;

  void add(const PathCorpus& c) {
    if (c.size() == 0) return;
    total += c.size();
    for (auto& g : groups)
      if (g.length() == c.length()) {
        append_corpus(g, c);
        return;
      }
    groups.push_back(c);
  }
};

struct TaggedAlignment {
  const AlignmentSet* set = nullptr;
  std::uint8_t left_tag = 0, right_tag = 0;
};

// Raw walks per graph plus both augmentations across every alignment.
// `salt` folds the resampling round into the walk streams.
inline CorpusGroups build_corpus_groups(const std::vector<const KnowledgeGraph*>& kgs,
                                        const std::vector<TaggedAlignment>& alignments,
                                        WalkConfig walk, double cap_multiplier,
                                        std::uint64_t seed, std::uint64_t salt,
                                        std::vector<PathCorpus>* raw_out = nullptr) {
  std::vector<PathCorpus> raws;
  raws.reserve(kgs.size());
  for (std::size_t i = 0; i < kgs.size(); ++i) {
    WalkConfig wc = walk;
    wc.seed = derive_seed(derive_seed(derive_seed(seed, seed_tag::walk), i), salt);
    raws.push_back(sample_paths(*kgs[i], static_cast<std::uint8_t>(i), wc));
  }
  CorpusGroups out;
  for (const auto& r : raws) out.add(r);
  for (std::size_t ai = 0; ai < alignments.size(); ++ai) {
    const auto& ta = alignments[ai];
    if (ta.set->pairs.empty()) continue;
    AlignmentIndex idx(*ta.set, ta.left_tag, ta.right_tag);
    for (std::uint8_t tag : {ta.left_tag, ta.right_tag}) {
      AugmentConfig ac{cap_multiplier,
                       derive_seed(derive_seed(derive_seed(seed, seed_tag::replace),
                                               ai * 2 + (tag == ta.left_tag ? 0 : 1)),
                                   salt)};
      out.add(augment_entity_replacement(raws[tag], idx, ac));
    }
    AugmentConfig c1{cap_multiplier,
                     derive_seed(derive_seed(derive_seed(seed, seed_tag::concat), ai * 2), salt)};
    out.add(augment_concatenation(raws[ta.left_tag], raws[ta.right_tag], idx, c1));
    AugmentConfig c2{cap_multiplier, derive_seed(derive_seed(derive_seed(seed, seed_tag::concat),
                                                             ai * 2 + 1),
                                                 salt)};
    out.add(augment_concatenation(raws[ta.right_tag], raws[ta.left_tag], idx, c2));
  }
  if (raw_out) *raw_out = std::move(raws);
  return out;
}

inline PathBatch make_batch(const PathCorpus& c, const std::vector<std::size_t>& order,
                            std::size_t begin, std::size_t end, const JointVocab& v) {
  PathBatch batch;
  batch.length = c.length();
  batch.ids.assign(static_cast<std::size_t>(c.length()),
                   std::vector<std::int32_t>(end - begin));
  for (std::size_t r = begin; r < end; ++r) {
    std::size_t path = order[r];
    for (std::int32_t pos = 0; pos < c.length(); ++pos) {
      std::uint8_t tag = c.tag(path, pos);
      std::int32_t off = is_entity_position(pos) ? v.ent_off[tag] : v.rel_off[tag];
      batch.ids[static_cast<std::size_t>(pos)][r - begin] = off + c.element(path, pos);
    }
  }
  return batch;
}

struct BatchRef {
  std::size_t group, begin, end;
};

// Shuffles each group and the batch order across groups; a pure function of
// (seed, epoch), so runs replay exactly.
inline std::vector<BatchRef> plan_epoch(const CorpusGroups& corpora, int batch_size,
                                        std::uint64_t seed, int epoch,
                                        std::vector<std::vector<std::size_t>>& orders) {
  orders.clear();
  std::vector<BatchRef> refs;
  for (std::size_t g = 0; g < corpora.groups.size(); ++g) {
    Rng rng(derive_seed(derive_seed(derive_seed(seed, seed_tag::shuffle), g),
                        static_cast<std::uint64_t>(epoch)));
    orders.push_back(shuffled_indices(corpora.groups[g].size(), rng));
    for (std::size_t b = 0; b < corpora.groups[g].size(); b += static_cast<std::size_t>(batch_size))
      refs.push_back({g, b, std::min(corpora.groups[g].size(),
                                     b + static_cast<std::size_t>(batch_size))});
  }
  Rng order_rng(derive_seed(derive_seed(seed, seed_tag::order), static_cast<std::uint64_t>(epoch)));
  fisher_yates(refs, order_rng);
  return refs;
}

inline std::uint64_t step_salt(int epoch, std::size_t step) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(epoch)) << 32) |
         static_cast<std::uint32_t>(step);
}

template <typename S>
double kg_training_step(ParameterSet<S>& params, AdamState<S>& adam, const TrainConfig& train,
                        const EncoderConfig& encoder, const NceConfig& nce,
                        const NegativeDistribution& ent_dist, const NegativeDistribution& rel_dist,
                        const PathBatch& batch, int epoch, std::size_t step) {
  Tape<S> tape;
  ParamBinding<S> binding(tape, params, true);
  Rng drop_rng(derive_seed(derive_seed(train.seed, seed_tag::dropout), step_salt(epoch, step)));
  Rng neg_rng(derive_seed(derive_seed(train.seed, seed_tag::negatives), step_salt(epoch, step)));
  Var<S> loss = nce_path_loss(tape, binding, encoder, batch, ent_dist, rel_dist, nce,
                              /*train=*/true, drop_rng, neg_rng);
  GradientSet<S> grads = compute_gradients(loss, binding);
  adam_step(params, grads, adam, train.adam);
  return static_cast<double>(loss.val()(0, 0));
}

inline std::string format_epoch_line(const char* kind, int epoch, double loss, double seconds) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%d %s=%.12g wall_time=%.3f", epoch, kind, loss, seconds);
  return buf;
}

}  // namespace detail

template <typename S>
struct PretrainResult {
  Checkpoint<S> checkpoint;
  std::vector<std::string> log_lines;
  std::vector<double> epoch_mean_loss;
};

// Joint pre-training over the collection: reverse-close every graph, sample
// and augment paths into a unified corpus, then minimize the path prediction
// loss for a fixed number of epochs. The teacher stops on the epoch budget
// alone; early stopping belongs to re-training.
template <typename S>
PretrainResult<S> pretrain(const MultiSourceCollection& collection, const WalkConfig& walk,
                           const NceConfig& nce, const TrainConfig& train,
                           const EncoderConfig& encoder_in, bool allow_single_kg = false) {
  validate_train_config(train);
  validate_nce_config(nce);
  collection.validate(allow_single_kg);

  std::vector<KnowledgeGraph> closed;
  closed.reserve(collection.kgs.size());
  for (const auto& kg : collection.kgs) closed.push_back(add_reverse_triplets(kg));
  std::vector<const KnowledgeGraph*> kg_ptrs;
  for (const auto& kg : closed) kg_ptrs.push_back(&kg);

  std::vector<detail::TaggedAlignment> alignments;
  for (const auto& a : collection.alignments)
    alignments.push_back({&a, static_cast<std::uint8_t>(collection.kg_index(a.left_kg)),
                          static_cast<std::uint8_t>(collection.kg_index(a.right_kg))});

  detail::JointVocab vocab = detail::build_joint_vocab(kg_ptrs);
  detail::CorpusGroups corpora = detail::build_corpus_groups(
      kg_ptrs, alignments, walk, train.augment_cap_multiplier, train.seed, 0);
  if (corpora.total == 0) throw DataError("pre-training corpus is empty");

  EncoderConfig encoder = encoder_in;
  for (const auto& g : corpora.groups)
    if (encoder.max_path_length < g.length()) encoder.max_path_length = g.length();

  NegativeDistribution ent_dist(vocab.ent_counts);
  NegativeDistribution rel_dist(vocab.rel_counts);
  ParameterSet<S> params = init_parameters<S>(encoder, vocab.n_ent, vocab.n_rel,
                                              derive_seed(train.seed, seed_tag::init));
  AdamState<S> adam(params);

  PretrainResult<S> result;
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    if (train.resample_every > 0 && epoch > 1 && (epoch - 1) % train.resample_every == 0)
      corpora = detail::build_corpus_groups(kg_ptrs, alignments, walk,
                                            train.augment_cap_multiplier, train.seed,
                                            static_cast<std::uint64_t>(epoch));
    std::vector<std::vector<std::size_t>> orders;
    auto refs = detail::plan_epoch(corpora, train.batch_size, train.seed, epoch, orders);
    double loss_sum = 0.0;
    std::size_t rows = 0;
    for (std::size_t step = 0; step < refs.size(); ++step) {
      const auto& ref = refs[step];
      PathBatch batch = detail::make_batch(corpora.groups[ref.group], orders[ref.group],
                                           ref.begin, ref.end, vocab);
      double loss = detail::kg_training_step(params, adam, train, encoder, nce, ent_dist,
                                             rel_dist, batch, epoch, step);
      loss_sum += loss * static_cast<double>(ref.end - ref.begin);
      rows += ref.end - ref.begin;
    }
    double mean = loss_sum / static_cast<double>(rows);
    result.epoch_mean_loss.push_back(mean);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log_lines.push_back(detail::format_epoch_line("mean_loss", epoch, mean, secs));
  }

  result.checkpoint.encoder = encoder;
  result.checkpoint.params = std::move(params);
  result.checkpoint.entity_names = std::move(vocab.entity_names);
  result.checkpoint.relation_names = std::move(vocab.relation_names);
  result.checkpoint.meta.emplace_back("seed", std::to_string(train.seed));
  result.checkpoint.meta.emplace_back("epochs", std::to_string(train.epochs));
  {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g",
                  result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back());
    result.checkpoint.meta.emplace_back("final_loss", buf);
  }
  return result;
}

struct ValidationPoint {
  int epoch = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits10 = 0.0;
};

template <typename S>
struct RetrainResult {
  Checkpoint<S> student;
  std::vector<std::string> log_lines;
  std::vector<double> epoch_mean_kg_loss;
  std::vector<double> epoch_mean_kd_loss;
  std::vector<ValidationPoint> validation;
  int best_epoch = -1;
  double best_mrr = -1.0;
  int epochs_run = 0;
};

// Local re-training. The student vocabulary leads with the full target
// vocabulary (entities [0, |E_t|), relations [0, 2|R_t|) after closure), then
// appends the sampled-subgraph blocks, so target-side evaluation indexes the
// student tables directly. Without a teacher this is plain link-prediction
// training; with one, KG-loss batches and distillation batches alternate 1:1.
// Early stopping tracks filtered validation MRR every val_period epochs and
// returns the best snapshot.
template <typename S>
RetrainResult<S> retrain(const KnowledgeGraph& target, const DatasetSplit& split,
                         const Checkpoint<S>* teacher, const LinkedSubgraph* subgraph,
                         const KnowledgeGraph* background, const WalkConfig& walk,
                         const NceConfig& nce, const TrainConfig& train,
                         const EncoderConfig& encoder_in, const DistillConfig& distill,
                         int eval_threads = 1) {
  validate_train_config(train);
  validate_nce_config(nce);
  validate_distill_config(distill);
  if (split.valid.empty()) throw DataError("re-training requires validation triplets");
  validate_split(target, split);

  // Target training graph: full target vocabulary, training triplets only.
  KnowledgeGraph tgt_train;
  tgt_train.name = target.name;
  tgt_train.entities = target.entities;
  for (std::int32_t r = 0; r < target.relations.size(); ++r)
    tgt_train.add_relation(target.relations.name(r), target.relation_is_reverse[static_cast<std::size_t>(r)]);
  for (const auto& t : split.train) tgt_train.add_triplet(t);
  KnowledgeGraph tgt_closed = add_reverse_triplets(tgt_train);

  bool have_sub = subgraph != nullptr && !subgraph->sampled.empty();
  if (have_sub && background == nullptr)
    throw ConfigError("re-training with a subgraph requires the background graph");

  // Subgraph block in local ids (entity order = sampled entity order).
  KnowledgeGraph sub_kg;
  std::vector<std::int32_t> sub_rel_of_bg;  // bg relation id -> local, -1 if absent
  if (have_sub) {
    sub_kg.name = background->name;
    std::unordered_map<std::int32_t, std::int32_t> ent_local;
    for (auto e : subgraph->entities) {
      ent_local.emplace(e, sub_kg.entities.size());
      sub_kg.entities.get_or_add(background->entities.name(e));
    }
    sub_rel_of_bg.assign(static_cast<std::size_t>(background->relations.size()), -1);
    for (const auto& t : subgraph->sampled) {
      auto& slot = sub_rel_of_bg[static_cast<std::size_t>(t.r)];
      if (slot < 0) slot = sub_kg.add_relation(background->relations.name(t.r));
      sub_kg.add_triplet({ent_local.at(t.s), slot, ent_local.at(t.o)});
    }
  }
  KnowledgeGraph sub_closed = have_sub ? add_reverse_triplets(sub_kg) : KnowledgeGraph{};

  std::vector<const KnowledgeGraph*> kg_ptrs = {&tgt_closed};
  if (have_sub) kg_ptrs.push_back(&sub_closed);
  detail::JointVocab vocab = detail::build_joint_vocab(kg_ptrs);
  std::int32_t n_target_entities = target.entities.size();

  // Alignment restricted to the sampled entities, in local/student ids.
  AlignmentSet sub_alignment;  // left = subgraph block (tag 1), right = target
  std::vector<std::pair<std::int32_t, std::int32_t>> aligned_student_pairs;
  if (have_sub) {
    sub_alignment.left_kg = sub_closed.name;
    sub_alignment.right_kg = tgt_closed.name;
    std::unordered_map<std::int32_t, std::int32_t> ent_local;
    for (std::size_t i = 0; i < subgraph->entities.size(); ++i)
      ent_local.emplace(subgraph->entities[i], static_cast<std::int32_t>(i));
    for (auto [bg, tgt] : subgraph->pairs) {
      std::int32_t local = ent_local.at(bg);
      sub_alignment.add(local, tgt);
      aligned_student_pairs.emplace_back(n_target_entities + local, tgt);
    }
  }
  std::vector<detail::TaggedAlignment> alignments;
  if (have_sub && !sub_alignment.pairs.empty()) alignments.push_back({&sub_alignment, 1, 0});

  std::vector<PathCorpus> raws;
  detail::CorpusGroups corpora = detail::build_corpus_groups(
      kg_ptrs, alignments, walk, train.augment_cap_multiplier, train.seed, 0, &raws);
  if (corpora.total == 0) throw DataError("re-training corpus is empty");

  EncoderConfig encoder = encoder_in;
  for (const auto& g : corpora.groups)
    if (encoder.max_path_length < g.length()) encoder.max_path_length = g.length();

  NegativeDistribution ent_dist(vocab.ent_counts);
  NegativeDistribution rel_dist(vocab.rel_counts);
  ParameterSet<S> params = init_parameters<S>(encoder, vocab.n_ent, vocab.n_rel,
                                              derive_seed(train.seed, seed_tag::init));
  AdamState<S> adam(params);

  // Distillation state. The prediction target set is the subgraph entity
  // block; teacher distributions over it are computed once and cached.
  bool kd_active = teacher != nullptr && (have_sub || distill.alpha > 0.0);
  KdBridge<S> bridge;
  AdamState<S>* kd_adam = nullptr;
  std::vector<std::int32_t> eprime_student_ids, eprime_teacher_ids, kd_candidates_student;
  typename Tape<S>::Mat teacher_probs;  // (#subgraph paths, |E'|)
  PathCorpus kd_corpus(3);
  std::vector<std::int32_t> teacher_rel_ids;
  bool kd_prediction = false;

  std::unique_ptr<AdamState<S>> kd_adam_owned;
  if (kd_active) {
    bridge = init_kd_transforms(teacher->params, params,
                                static_cast<Eigen::Index>(teacher->encoder.dim),
                                static_cast<Eigen::Index>(encoder.dim),
                                derive_seed(train.seed, seed_tag::kd));
    kd_adam_owned = std::make_unique<AdamState<S>>(bridge.transforms);
    kd_adam = kd_adam_owned.get();
    if (have_sub) {
      std::unordered_map<std::string, std::int32_t> t_ent, t_rel;
      for (std::size_t i = 0; i < teacher->entity_names.size(); ++i)
        t_ent.emplace(teacher->entity_names[i], static_cast<std::int32_t>(i));
      for (std::size_t i = 0; i < teacher->relation_names.size(); ++i)
        t_rel.emplace(teacher->relation_names[i], static_cast<std::int32_t>(i));
      auto teacher_entity = [&](std::int32_t sub_local) {
        std::string key = sub_closed.name + ":" + sub_closed.entities.name(sub_local);
        auto it = t_ent.find(key);
        if (it == t_ent.end())
          throw DataError("entity '" + key + "' has no teacher embedding");
        return it->second;
      };
      for (std::int32_t i = 0; i < sub_closed.entities.size(); ++i) {
        eprime_student_ids.push_back(n_target_entities + i);
        eprime_teacher_ids.push_back(teacher_entity(i));
        kd_candidates_student.push_back(n_target_entities + i);
      }
      teacher_rel_ids.resize(static_cast<std::size_t>(sub_closed.relations.size()));
      for (std::int32_t r = 0; r < sub_closed.relations.size(); ++r) {
        std::string key = sub_closed.name + ":" + sub_closed.relations.name(r);
        auto it = t_rel.find(key);
        if (it == t_rel.end())
          throw DataError("relation '" + key + "' has no teacher parameter");
        teacher_rel_ids[static_cast<std::size_t>(r)] = it->second;
      }
      kd_corpus = raws.size() > 1 ? raws[1] : PathCorpus(walk.path_length);
      kd_prediction = distill.beta > 0.0 && kd_corpus.size() > 0 &&
                      !kd_candidates_student.empty();
      if (kd_prediction) {
        // Teacher ids for every cached path; chunked to bound tape size.
        teacher_probs.resize(static_cast<Eigen::Index>(kd_corpus.size()),
                             static_cast<Eigen::Index>(eprime_teacher_ids.size()));
        std::vector<std::size_t> ident(kd_corpus.size());
        for (std::size_t i = 0; i < ident.size(); ++i) ident[i] = i;
        const std::size_t chunk = 1024;
        for (std::size_t b = 0; b < kd_corpus.size(); b += chunk) {
          std::size_t e = std::min(kd_corpus.size(), b + chunk);
          PathBatch tb;
          tb.length = kd_corpus.length();
          tb.ids.assign(static_cast<std::size_t>(tb.length),
                        std::vector<std::int32_t>(e - b));
          for (std::size_t r = b; r < e; ++r)
            for (std::int32_t pos = 0; pos < tb.length; ++pos) {
              std::int32_t el = kd_corpus.element(r, pos);
              tb.ids[static_cast<std::size_t>(pos)][r - b] =
                  is_entity_position(pos) ? teacher_entity(el)
                                          : teacher_rel_ids[static_cast<std::size_t>(el)];
            }
          teacher_probs.middleRows(static_cast<Eigen::Index>(b),
                                   static_cast<Eigen::Index>(e - b)) =
              teacher_prediction_matrix(*teacher, tb, eprime_teacher_ids);
        }
      }
    }
  }

  // KD batches cycle over the raw subgraph corpus, reshuffled per epoch.
  std::vector<std::size_t> kd_order;
  std::size_t kd_cursor = 0;
  int kd_epoch_salt = 0;
  auto next_kd_range = [&](std::size_t want) -> std::pair<std::size_t, std::size_t> {
    if (kd_order.empty() || kd_cursor >= kd_order.size()) {
      Rng rng(derive_seed(derive_seed(train.seed, seed_tag::kd_shuffle),
                          static_cast<std::uint64_t>(kd_epoch_salt++)));
      kd_order = shuffled_indices(kd_corpus.size(), rng);
      kd_cursor = 0;
    }
    std::size_t begin = kd_cursor;
    std::size_t end = std::min(kd_order.size(), begin + want);
    kd_cursor = end;
    return {begin, end};
  };

  RetrainResult<S> result;
  ParameterSet<S> best_params = params;
  int bad_checks = 0;
  bool stopped = false;

  for (int epoch = 1; epoch <= train.epochs && !stopped; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    result.epochs_run = epoch;
    if (train.resample_every > 0 && epoch > 1 && (epoch - 1) % train.resample_every == 0)
      corpora = detail::build_corpus_groups(kg_ptrs, alignments, walk,
                                            train.augment_cap_multiplier, train.seed,
                                            static_cast<std::uint64_t>(epoch));
    std::vector<std::vector<std::size_t>> orders;
    auto refs = detail::plan_epoch(corpora, train.batch_size, train.seed, epoch, orders);
    double kg_sum = 0.0, kd_sum = 0.0;
    std::size_t kg_rows = 0, kd_steps = 0;
    for (std::size_t step = 0; step < refs.size(); ++step) {
      const auto& ref = refs[step];
      PathBatch batch = detail::make_batch(corpora.groups[ref.group], orders[ref.group],
                                           ref.begin, ref.end, vocab);
      double loss = detail::kg_training_step(params, adam, train, encoder, nce, ent_dist,
                                             rel_dist, batch, epoch, step);
      kg_sum += loss * static_cast<double>(ref.end - ref.begin);
      kg_rows += ref.end - ref.begin;

      if (!kd_active) continue;
      Tape<S> tape;
      ParamBinding<S> student(tape, params, true);
      ParamBinding<S> transforms(tape, bridge.transforms, true);
      Var<S> kd_loss = feature_kd_loss(tape, student, transforms,
                                       teacher->params.at("entity_embeddings"),
                                       eprime_student_ids, eprime_teacher_ids,
                                       aligned_student_pairs);
      if (distill.alpha > 0.0)
        kd_loss = add(kd_loss, scale(network_kd_loss(tape, student, transforms, teacher->params,
                                                     bridge.matched),
                                     static_cast<S>(distill.alpha)));
      if (kd_prediction) {
        auto [kb, ke] = next_kd_range(static_cast<std::size_t>(train.batch_size));
        if (ke > kb) {
          PathBatch kd_batch = detail::make_batch(kd_corpus, kd_order, kb, ke, vocab);
          // The raw subgraph corpus is single-tagged; map_batch used tag 1 via
          // the joint vocab, which is exactly the student id block.
          typename Tape<S>::Mat probs_rows(static_cast<Eigen::Index>(ke - kb),
                                           teacher_probs.cols());
          for (std::size_t r = kb; r < ke; ++r)
            probs_rows.row(static_cast<Eigen::Index>(r - kb)) =
                teacher_probs.row(static_cast<Eigen::Index>(kd_order[r]));
          Rng drop_rng(derive_seed(derive_seed(train.seed, seed_tag::dropout),
                                   detail::step_salt(epoch, step) ^ 0x9e3779b97f4a7c15ULL));
          Var<S> student_probs = student_prediction_rows(tape, student, encoder, kd_batch,
                                                         kd_candidates_student,
                                                         /*train=*/true, drop_rng);
          kd_loss = add(kd_loss, scale(prediction_kd_loss(tape, probs_rows, student_probs),
                                       static_cast<S>(distill.beta)));
        }
      }
      if (!std::isfinite(static_cast<double>(kd_loss.val()(0, 0))))
        throw NumericError("distillation loss is not finite");
      tape.backward(kd_loss.id);
      adam_step(params, student.collect(), adam, train.adam);
      adam_step(bridge.transforms, transforms.collect(), *kd_adam, train.adam);
      kd_sum += static_cast<double>(kd_loss.val()(0, 0));
      kd_steps += 1;
    }
    double kg_mean = kg_sum / static_cast<double>(kg_rows);
    result.epoch_mean_kg_loss.push_back(kg_mean);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (kd_active) {
      double kd_mean = kd_steps ? kd_sum / static_cast<double>(kd_steps) : 0.0;
      result.epoch_mean_kd_loss.push_back(kd_mean);
      char buf[200];
      std::snprintf(buf, sizeof buf, "epoch=%d mean_kg_loss=%.12g mean_kd_loss=%.12g wall_time=%.3f",
                    epoch, kg_mean, kd_mean, secs);
      result.log_lines.emplace_back(buf);
    } else {
      result.log_lines.push_back(detail::format_epoch_line("mean_kg_loss", epoch, kg_mean, secs));
    }

    if (epoch % distill.val_period == 0) {
      MetricsReport rep = evaluate(encoder, params, split.valid, tgt_closed, 0,
                                   n_target_entities, "validation", eval_threads);
      result.validation.push_back({epoch, rep.mrr, rep.hits1, rep.hits10});
      char buf[200];
      std::snprintf(buf, sizeof buf, "validation epoch=%d mrr=%.12g hits1=%.12g hits10=%.12g",
                    epoch, rep.mrr, rep.hits1, rep.hits10);
      result.log_lines.emplace_back(buf);
      if (rep.mrr > result.best_mrr) {
        result.best_mrr = rep.mrr;
        result.best_epoch = epoch;
        best_params = params;
        bad_checks = 0;
      } else {
        bad_checks += 1;
        if (bad_checks > distill.patience) {
          result.log_lines.push_back("early_stop epoch=" + std::to_string(epoch));
          stopped = true;
        }
      }
    }
  }

  result.student.encoder = encoder;
  result.student.params = result.best_epoch >= 0 ? std::move(best_params) : std::move(params);
  result.student.entity_names = std::move(vocab.entity_names);
  result.student.relation_names = std::move(vocab.relation_names);
  result.student.meta.emplace_back("seed", std::to_string(train.seed));
  result.student.meta.emplace_back("epochs_run", std::to_string(result.epochs_run));
  result.student.meta.emplace_back("best_epoch", std::to_string(result.best_epoch));
  {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", result.best_mrr);
    result.student.meta.emplace_back("best_valid_mrr", buf);
  }
  result.student.meta.emplace_back("n_target_entities", std::to_string(n_target_entities));
  result.student.meta.emplace_back(
      "n_target_relations", std::to_string(tgt_closed.relations.size()));
  return result;
}

}  // namespace kgt
