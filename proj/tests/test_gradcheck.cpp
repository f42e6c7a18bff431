// Central finite-difference verification of reverse-mode gradients for every
// encoder and every training-loss family. The exhaustive randomized sweep
// lives in the acceptance runner; these are aimed, fast configurations.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kgt/distill.hpp"
#include "kgt/nn.hpp"
#include "kgt/objective.hpp"
#include "kgt/tape.hpp"

#include "testutil.hpp"

namespace {

using Mat = Eigen::MatrixXd;

kgt::EncoderConfig make_cfg(kgt::EncoderKind kind, int dim, int layers = 1, int heads = 2,
                            double dropout = 0.0) {
  kgt::EncoderConfig cfg;
  cfg.kind = kind;
  cfg.dim = dim;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.dropout_rate = dropout;
  cfg.max_path_length = 7;
  return cfg;
}

kgt::PathBatch five_batch() {
  kgt::PathBatch b;
  b.length = 5;
  b.ids = {{0, 5}, {1, 3}, {2, 2}, {0, 1}, {4, 3}};
  return b;
}

}  // namespace

TEST_CASE("path-loss gradients match central differences for every encoder") {
  kgt::NegativeDistribution ent_dist({3, 1, 2, 4, 1, 2});
  kgt::NegativeDistribution rel_dist({2, 1, 3, 2});
  kgt::NceConfig nce;
  nce.k = 2;
  auto batch = five_batch();

  int seed = 201;
  for (auto kind :
       {kgt::EncoderKind::lstm, kgt::EncoderKind::rsn, kgt::EncoderKind::transformer}) {
    auto cfg = make_cfg(kind, 4, 1, 2);
    auto params = kgt::init_parameters<double>(cfg, 6, 4, static_cast<std::uint64_t>(seed++));
    auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
      kgt::Rng drop(11), neg(17);
      return kgt::nce_path_loss(t, b[0], cfg, batch, ent_dist, rel_dist, nce, true, drop, neg);
    };
    auto rep = testutil::finite_difference_check({&params}, build);
    INFO("encoder ", kgt::to_string(kind), " worst ", rep.worst);
    CHECK(rep.max_err <= 1e-4);
    CHECK(rep.entries > 100);
  }
}

TEST_CASE("path-loss gradients hold for the literal negative-term variant") {
  kgt::NegativeDistribution ent_dist({3, 1, 2, 4, 1, 2});
  kgt::NegativeDistribution rel_dist({2, 1, 3, 2});
  kgt::NceConfig nce;
  nce.k = 2;
  nce.printed_form = true;
  auto batch = five_batch();
  auto cfg = make_cfg(kgt::EncoderKind::lstm, 4, 1);
  auto params = kgt::init_parameters<double>(cfg, 6, 4, 211);
  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    kgt::Rng drop(11), neg(17);
    return kgt::nce_path_loss(t, b[0], cfg, batch, ent_dist, rel_dist, nce, true, drop, neg);
  };
  auto rep = testutil::finite_difference_check({&params}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}

TEST_CASE("gradients remain exact under active dropout") {
  kgt::NegativeDistribution ent_dist({3, 1, 2, 4, 1, 2});
  kgt::NegativeDistribution rel_dist({2, 1, 3, 2});
  kgt::NceConfig nce;
  nce.k = 1;
  auto batch = five_batch();
  for (auto kind : {kgt::EncoderKind::lstm, kgt::EncoderKind::transformer}) {
    auto cfg = make_cfg(kind, 4, 1, 2, 0.3);
    auto params = kgt::init_parameters<double>(
        cfg, 6, 4, kind == kgt::EncoderKind::lstm ? 223u : 227u);
    auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
      // Re-seeding inside the builder pins the dropout masks and negative
      // draws, so every finite-difference probe sees the same network.
      kgt::Rng drop(31), neg(37);
      return kgt::nce_path_loss(t, b[0], cfg, batch, ent_dist, rel_dist, nce, true, drop, neg);
    };
    auto rep = testutil::finite_difference_check({&params}, build);
    INFO("encoder ", kgt::to_string(kind), " worst ", rep.worst);
    CHECK(rep.max_err <= 1e-4);
  }
}

TEST_CASE("multi-layer multi-head configurations keep exact gradients") {
  kgt::NegativeDistribution ent_dist({3, 1, 2, 4, 1, 2});
  kgt::NegativeDistribution rel_dist({2, 1, 3, 2});
  kgt::NceConfig nce;
  nce.k = 1;
  auto batch = five_batch();
  auto cfg = make_cfg(kgt::EncoderKind::transformer, 4, 2, 4);
  auto params = kgt::init_parameters<double>(cfg, 6, 4, 229);
  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    kgt::Rng drop(41), neg(43);
    return kgt::nce_path_loss(t, b[0], cfg, batch, ent_dist, rel_dist, nce, true, drop, neg);
  };
  auto rep = testutil::finite_difference_check({&params}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}

TEST_CASE("feature-distillation gradients reach embeddings and the cross-dimension map") {
  kgt::Rng rng(47);
  kgt::ParameterSet<double> student;
  auto& se = student.add("entity_embeddings", 5, 4);
  for (Eigen::Index i = 0; i < se.size(); ++i) se(i) = rng.uniform(-1.0, 1.0);
  kgt::ParameterSet<double> transforms;
  auto& wf = transforms.add("w_feat", 3, 4);  // teacher dim 3, student dim 4
  for (Eigen::Index i = 0; i < wf.size(); ++i) wf(i) = rng.uniform(-1.0, 1.0);
  Mat teacher(5, 3);
  for (Eigen::Index i = 0; i < teacher.size(); ++i) teacher(i) = rng.uniform(-1.0, 1.0);

  std::vector<std::pair<std::int32_t, std::int32_t>> pairs = {{0, 1}, {2, 3}};
  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    return kgt::feature_kd_loss(t, b[0], b[1], teacher, {0, 1, 2}, {0, 1, 2}, pairs);
  };
  auto rep = testutil::finite_difference_check({&student, &transforms}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}

TEST_CASE("network-distillation gradients cover student weights and transforms") {
  auto cfg = make_cfg(kgt::EncoderKind::rsn, 3, 1);
  auto teacher = kgt::init_parameters<double>(cfg, 5, 3, 53);
  auto student = kgt::init_parameters<double>(cfg, 5, 3, 59);
  auto bridge = kgt::init_kd_transforms<double>(teacher, student, 3, 3, 61);
  // Perturb the identity maps so the loss is not sitting at a stationary point.
  kgt::Rng rng(67);
  for (std::size_t i = 0; i < bridge.transforms.size(); ++i)
    for (Eigen::Index j = 0; j < bridge.transforms.value(i).size(); ++j)
      bridge.transforms.value(i)(j) += rng.uniform(-0.2, 0.2);

  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    return kgt::network_kd_loss(t, b[0], b[1], teacher, bridge.matched);
  };
  auto rep = testutil::finite_difference_check({&student, &bridge.transforms}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}

TEST_CASE("prediction-distillation gradients flow through the student softmax") {
  auto cfg = make_cfg(kgt::EncoderKind::lstm, 4, 1);
  auto params = kgt::init_parameters<double>(cfg, 6, 2, 71);
  kgt::PathBatch batch;
  batch.length = 3;
  batch.ids = {{0, 2}, {1, 0}, {3, 4}};
  std::vector<std::int32_t> cands = {1, 3, 5};
  Mat teacher_probs(2, 3);
  teacher_probs << 0.2, 0.5, 0.3, 0.6, 0.1, 0.3;

  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    kgt::Rng drop(73);
    auto sp = kgt::student_prediction_rows(t, b[0], cfg, batch, cands, false, drop);
    return kgt::prediction_kd_loss(t, teacher_probs, sp);
  };
  auto rep = testutil::finite_difference_check({&params}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}

TEST_CASE("the combined distillation objective has exact gradients") {
  auto cfg = make_cfg(kgt::EncoderKind::rsn, 3, 1);
  auto teacher_params = kgt::init_parameters<double>(cfg, 6, 3, 79);
  auto student = kgt::init_parameters<double>(cfg, 6, 3, 83);
  auto bridge = kgt::init_kd_transforms<double>(teacher_params, student, 3, 3, 89);
  kgt::Rng jitter(97);
  for (std::size_t i = 0; i < bridge.transforms.size(); ++i)
    for (Eigen::Index j = 0; j < bridge.transforms.value(i).size(); ++j)
      bridge.transforms.value(i)(j) += jitter.uniform(-0.2, 0.2);

  kgt::PathBatch batch;
  batch.length = 3;
  batch.ids = {{0, 2}, {1, 0}, {3, 4}};
  std::vector<std::int32_t> cands = {1, 4, 5};
  Mat teacher_probs(2, 3);
  teacher_probs << 0.25, 0.45, 0.3, 0.5, 0.2, 0.3;
  const Mat teacher_entities = teacher_params.at("entity_embeddings");
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs = {{1, 4}};

  auto build = [&](kgt::Tape<double>& t, std::vector<kgt::ParamBinding<double>>& b) {
    kgt::Rng drop(101);
    auto l_feat =
        kgt::feature_kd_loss(t, b[0], b[1], teacher_entities, {0, 1, 2}, {0, 1, 2}, pairs);
    auto l_net = kgt::network_kd_loss(t, b[0], b[1], teacher_params, bridge.matched);
    auto sp = kgt::student_prediction_rows(t, b[0], cfg, batch, cands, false, drop);
    auto l_prob = kgt::prediction_kd_loss(t, teacher_probs, sp);
    return kgt::total_kd_loss(l_feat, l_net, l_prob, 0.5, 0.25);
  };
  auto rep = testutil::finite_difference_check({&student, &bridge.transforms}, build);
  INFO("worst ", rep.worst);
  CHECK(rep.max_err <= 1e-4);
}
