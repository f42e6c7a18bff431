#include "kgt/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include "kgt/checkpoint.hpp"
#include "kgt/rules.hpp"
#include "kgt/trainer.hpp"

namespace kgt {
namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return cfg.output_dir + "/" + name;
}

// Quarantine pattern: fill a ".partial" directory, promote it only on
// success. A crash or thrown error leaves the partial directory behind and
// the previous artifact untouched.
void with_artifact_dir(const std::string& final_dir,
                       const std::function<void(const std::string&)>& fill) {
  fs::create_directories(fs::path(final_dir).parent_path());
  std::string tmp = final_dir + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  fill(tmp);
  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_text(out_path(cfg, "config.resolved.json"), render_run_config(cfg));
}

Manifest base_manifest(const RunConfig& cfg, const std::string& command) {
  Manifest m;
  m.set("tool", kToolVersion);
  m.set("command", command);
  m.set("config_hash", run_config_hash(cfg));
  m.set("seed", std::to_string(cfg.seed));
  return m;
}

void add_input_checksums(Manifest& m, const RunConfig& cfg) {
  auto add = [&](const std::string& key, const std::string& path) {
    if (!path.empty() && fs::is_regular_file(path))
      m.set("input." + key, to_hex(checksum_file(path)));
  };
  add("target.train", cfg.target_train);
  add("target.valid", cfg.target_valid);
  add("target.test", cfg.target_test);
  for (std::size_t i = 0; i < cfg.backgrounds.size(); ++i)
    add("background." + cfg.backgrounds[i].name, cfg.backgrounds[i].triplets);
  for (std::size_t i = 0; i < cfg.alignments.size(); ++i) {
    add("alignment." + std::to_string(i), cfg.alignments[i].pairs);
    if (!cfg.alignments[i].relation_map.empty())
      add("relation_map." + std::to_string(i), cfg.alignments[i].relation_map);
  }
}

// Target training graph over the full target vocabulary.
KnowledgeGraph train_graph(const Dataset& ds) {
  KnowledgeGraph g;
  g.name = ds.kg.name;
  g.entities = ds.kg.entities;
  for (std::int32_t r = 0; r < ds.kg.relations.size(); ++r)
    g.add_relation(ds.kg.relations.name(r),
                   ds.kg.relation_is_reverse[static_cast<std::size_t>(r)]);
  for (const auto& t : ds.split.train) g.add_triplet(t);
  return g;
}

// The collection joint training and mining operate on: the target training
// graph plus the (leakage-removed) backgrounds, linked by the configured
// alignments.
MultiSourceCollection build_collection(const LoadedData& data) {
  MultiSourceCollection col;
  col.kgs.push_back(train_graph(data.target));
  for (const auto& bg : data.backgrounds) col.kgs.push_back(bg);
  col.alignments = data.alignments;
  return col;
}

const AlignmentSet* find_target_alignment(const LoadedData& data, const std::string& bg_name,
                                          const std::string& target_name) {
  for (const auto& a : data.alignments)
    if ((a.left_kg == bg_name && a.right_kg == target_name) ||
        (a.left_kg == target_name && a.right_kg == bg_name))
      return &a;
  return nullptr;
}

// Alignment with the background on the left, as subgraph construction and
// leakage removal expect.
AlignmentSet orient_background_left(const AlignmentSet& a, const std::string& bg_name) {
  if (a.left_kg == bg_name) return a;
  AlignmentSet flipped;
  flipped.left_kg = a.right_kg;
  flipped.right_kg = a.left_kg;
  for (auto [l, r] : a.pairs) flipped.add(r, l);
  return flipped;
}

std::int64_t resolved_budget(const RunConfig& cfg, const LoadedData& data) {
  return cfg.budget >= 0 ? cfg.budget
                         : static_cast<std::int64_t>(data.target.split.train.size());
}

std::string teacher_dir(const RunConfig& cfg) {
  return cfg.teacher_checkpoint.empty() ? out_path(cfg, "teacher") : cfg.teacher_checkpoint;
}

// ---------------------------------------------------------------------------
// joint-lp: everything happens in the merged id space.

struct JointSpace {
  MergeResult merge;
  DatasetSplit split;  // mapped: train = target train + all background triplets
};

JointSpace build_joint_space(const LoadedData& data) {
  MultiSourceCollection col;
  col.kgs.push_back(data.target.kg);  // union graph: valid/test edges map too
  for (const auto& bg : data.backgrounds) col.kgs.push_back(bg);
  col.alignments = data.alignments;
  col.validate(false);

  JointSpace js;
  js.merge = merge_aligned(col);
  auto map_triplet = [&](std::size_t kg, const Triplet& t) {
    return Triplet{js.merge.entity_class[kg][static_cast<std::size_t>(t.s)],
                   js.merge.relation_map[kg][static_cast<std::size_t>(t.r)],
                   js.merge.entity_class[kg][static_cast<std::size_t>(t.o)]};
  };
  std::unordered_set<Triplet, TripletHash> seen;
  auto push_unique = [&](std::vector<Triplet>& dst, const Triplet& t) {
    if (seen.insert(t).second) dst.push_back(t);
  };
  for (const auto& t : data.target.split.train) push_unique(js.split.train, map_triplet(0, t));
  for (std::size_t b = 0; b < data.backgrounds.size(); ++b)
    for (const auto& t : data.backgrounds[b].triplets) push_unique(js.split.train, map_triplet(b + 1, t));
  // Held-out parts keep only triplets that stay outside the mapped train set
  // (an aligned background copy of a held-out edge would otherwise leak; the
  // leakage pass removes mapped copies, this guards the unmapped remainder).
  for (const auto& t : data.target.split.valid) {
    Triplet m = map_triplet(0, t);
    if (!seen.contains(m)) js.split.valid.push_back(m);
  }
  for (const auto& t : data.target.split.test) {
    Triplet m = map_triplet(0, t);
    if (!seen.contains(m)) js.split.test.push_back(m);
  }
  return js;
}

// ---------------------------------------------------------------------------
// Typed command bodies.

template <typename S>
void do_pretrain(const RunConfig& cfg, const LoadedData& data) {
  MultiSourceCollection col = build_collection(data);
  TrainConfig tc = cfg.train;
  tc.epochs = cfg.pretrain_epochs;
  PretrainResult<S> result = pretrain<S>(col, cfg.walk, cfg.nce, tc, cfg.encoder);
  result.checkpoint.meta.emplace_back("config_hash", run_config_hash(cfg));
  with_artifact_dir(out_path(cfg, "teacher"), [&](const std::string& dir) {
    save_checkpoint(result.checkpoint, dir);
    write_lines(dir + "/train.log", result.log_lines);
    Manifest m = base_manifest(cfg, "pretrain");
    add_input_checksums(m, cfg);
    m.set("epochs", std::to_string(tc.epochs));
    m.set("tensors_checksum", to_hex(checksum_file(dir + "/tensors.bin")));
    save_manifest(m, dir + "/artifact.txt");
  });
}

template <typename S>
void do_retrain(const RunConfig& cfg, const LoadedData& data) {
  RetrainResult<S> result;
  if (cfg.setting == "joint-lp") {
    JointSpace js = build_joint_space(data);
    result = retrain<S>(js.merge.merged, js.split, nullptr, nullptr, nullptr, cfg.walk, cfg.nce,
                        cfg.train, cfg.encoder, cfg.distill, cfg.threads);
  } else if (cfg.setting == "pr4lp") {
    Checkpoint<S> teacher = load_checkpoint<S>(teacher_dir(cfg));
    if (data.backgrounds.size() != 1)
      throw ConfigError("pr4lp re-training expects exactly one background graph");
    const KnowledgeGraph& bg = data.backgrounds[0];
    LinkedSubgraph sub = load_subgraph_artifact(out_path(cfg, "subgraph"), bg, data.target.kg);
    result = retrain<S>(data.target.kg, data.target.split, &teacher, &sub, &bg, cfg.walk,
                        cfg.nce, cfg.train, cfg.encoder, cfg.distill, cfg.threads);
  } else {
    result = retrain<S>(data.target.kg, data.target.split, nullptr, nullptr, nullptr, cfg.walk,
                        cfg.nce, cfg.train, cfg.encoder, cfg.distill, cfg.threads);
  }
  result.student.meta.emplace_back("config_hash", run_config_hash(cfg));
  result.student.meta.emplace_back("setting", cfg.setting);
  if (cfg.setting == "pr4lp")
    result.student.meta.emplace_back(
        "teacher_checksum", to_hex(checksum_file(teacher_dir(cfg) + "/tensors.bin")));
  with_artifact_dir(out_path(cfg, "student"), [&](const std::string& dir) {
    save_checkpoint(result.student, dir);
    write_lines(dir + "/train.log", result.log_lines);
    Manifest m = base_manifest(cfg, "retrain");
    add_input_checksums(m, cfg);
    m.set("setting", cfg.setting);
    m.set("epochs_run", std::to_string(result.epochs_run));
    m.set("best_epoch", std::to_string(result.best_epoch));
    m.set("tensors_checksum", to_hex(checksum_file(dir + "/tensors.bin")));
    save_manifest(m, dir + "/artifact.txt");
  });
}

// Checks that the checkpoint's leading entity block is exactly the graph's
// vocabulary (same names, same order), i.e. the model was trained on this
// data in this id space.
template <typename S>
void check_vocabulary(const Checkpoint<S>& ckpt, const KnowledgeGraph& kg) {
  if (ckpt.entity_names.size() < static_cast<std::size_t>(kg.entities.size()))
    throw DataError("checkpoint vocabulary is smaller than the evaluation graph");
  for (std::int32_t e = 0; e < kg.entities.size(); ++e)
    if (ckpt.entity_names[static_cast<std::size_t>(e)] != kg.name + ":" + kg.entities.name(e))
      throw DataError("checkpoint vocabulary mismatch at entity " + std::to_string(e) +
                      " (expected '" + kg.name + ":" + kg.entities.name(e) + "', found '" +
                      ckpt.entity_names[static_cast<std::size_t>(e)] + "')");
}

template <typename S>
MetricsReport do_eval(const RunConfig& cfg, const LoadedData& data) {
  Checkpoint<S> ckpt = load_checkpoint<S>(out_path(cfg, "student"));
  MetricsReport rep;
  if (cfg.setting == "joint-lp") {
    JointSpace js = build_joint_space(data);
    KnowledgeGraph filter_base;
    filter_base.name = js.merge.merged.name;
    filter_base.entities = js.merge.merged.entities;
    for (std::int32_t r = 0; r < js.merge.merged.relations.size(); ++r)
      filter_base.add_relation(js.merge.merged.relations.name(r),
                               js.merge.merged.relation_is_reverse[static_cast<std::size_t>(r)]);
    for (const auto& t : js.split.train) filter_base.add_triplet(t);
    if (cfg.eval_filter == "all") {
      for (const auto& t : js.split.valid) filter_base.add_triplet(t);
      for (const auto& t : js.split.test) filter_base.add_triplet(t);
    }
    KnowledgeGraph filter = add_reverse_triplets(filter_base);
    check_vocabulary(ckpt, js.merge.merged);
    if (js.split.test.empty()) throw DataError("evaluation: empty query split");
    rep = evaluate<S>(ckpt.encoder, ckpt.params, js.split.test, filter, 0,
                      js.merge.merged.entities.size(), "JointLP", cfg.threads);
  } else {
    check_vocabulary(ckpt, data.target.kg);
    KnowledgeGraph filter_base = train_graph(data.target);
    if (cfg.eval_filter == "all") {
      for (const auto& t : data.target.split.valid) filter_base.add_triplet(t);
      for (const auto& t : data.target.split.test) filter_base.add_triplet(t);
    }
    KnowledgeGraph filter = add_reverse_triplets(filter_base);
    rep = evaluate<S>(ckpt.encoder, ckpt.params, data.target.split.test, filter, 0,
                      data.target.kg.entities.size(),
                      cfg.setting == "pr4lp" ? "PR4LP" : "LP", cfg.threads);
  }
  with_artifact_dir(out_path(cfg, "eval"), [&](const std::string& dir) {
    write_metrics(rep, dir + "/metrics.txt");
    write_ranks(rep, dir + "/ranks.tsv");
    Manifest m = base_manifest(cfg, "eval");
    add_input_checksums(m, cfg);
    m.set("filter", cfg.eval_filter);
    m.set("checkpoint_checksum",
          to_hex(checksum_file(out_path(cfg, "student") + "/tensors.bin")));
    save_manifest(m, dir + "/artifact.txt");
  });
  return rep;
}

template <typename S>
void do_project(const RunConfig& cfg) {
  Checkpoint<S> ckpt = load_checkpoint<S>(out_path(cfg, "student"));
  const auto& table = ckpt.params.at("entity_embeddings");
  Eigen::MatrixXd points = table.template cast<double>();
  auto rows = project_embeddings(points, ckpt.entity_names);
  with_artifact_dir(out_path(cfg, "projection"), [&](const std::string& dir) {
    write_projection(rows, dir + "/coordinates.tsv");
    Manifest m = base_manifest(cfg, "project");
    m.set("entities", std::to_string(ckpt.entity_names.size()));
    m.set("checkpoint_checksum",
          to_hex(checksum_file(out_path(cfg, "student") + "/tensors.bin")));
    save_manifest(m, dir + "/artifact.txt");
  });
}

void do_ingest(const RunConfig& cfg, const LoadedData& data) {
  with_artifact_dir(out_path(cfg, "ingest"), [&](const std::string& dir) {
    save_kg(data.target.kg, dir + "/" + data.target.kg.name);
    Manifest m = base_manifest(cfg, "ingest");
    add_input_checksums(m, cfg);
    m.set("target.entities", std::to_string(data.target.kg.entities.size()));
    m.set("target.relations", std::to_string(data.target.kg.relations.size()));
    m.set("target.train", std::to_string(data.target.split.train.size()));
    m.set("target.valid", std::to_string(data.target.split.valid.size()));
    m.set("target.test", std::to_string(data.target.split.test.size()));
    for (std::size_t i = 0; i < data.backgrounds.size(); ++i) {
      const auto& bg = data.backgrounds[i];
      save_kg(bg, dir + "/" + bg.name);
      m.set("background." + bg.name + ".entities", std::to_string(bg.entities.size()));
      m.set("background." + bg.name + ".triplets", std::to_string(bg.triplets.size()));
      m.set("background." + bg.name + ".leakage_deleted",
            std::to_string(data.leakage[i].deleted));
      std::vector<std::string> lines;
      for (const auto& t : data.leakage[i].deleted_triplets)
        lines.push_back(bg.entities.name(t.s) + "\t" + bg.relations.name(t.r) + "\t" +
                        bg.entities.name(t.o));
      write_lines(dir + "/leakage_" + bg.name + ".tsv", lines);
    }
    save_manifest(m, dir + "/artifact.txt");
  });
}

void do_sample_paths(const RunConfig& cfg, const LoadedData& data) {
  std::vector<KnowledgeGraph> closed;
  std::vector<detail::TaggedAlignment> tagged;
  MultiSourceCollection col;
  if (cfg.setting == "lp") {
    col.kgs.push_back(train_graph(data.target));
  } else {
    col = build_collection(data);
    col.validate(false);
  }
  for (const auto& kg : col.kgs) closed.push_back(add_reverse_triplets(kg));
  std::vector<const KnowledgeGraph*> ptrs;
  for (const auto& kg : closed) ptrs.push_back(&kg);
  for (const auto& a : col.alignments)
    tagged.push_back({&a, static_cast<std::uint8_t>(col.kg_index(a.left_kg)),
                      static_cast<std::uint8_t>(col.kg_index(a.right_kg))});
  WalkConfig walk = cfg.walk;
  detail::CorpusGroups groups = detail::build_corpus_groups(
      ptrs, tagged, walk, cfg.train.augment_cap_multiplier, cfg.seed, 0);
  if (groups.total == 0) throw DataError("path corpus is empty");
  with_artifact_dir(out_path(cfg, "paths"), [&](const std::string& dir) {
    Manifest m = base_manifest(cfg, "sample-paths");
    add_input_checksums(m, cfg);
    m.set("paths_total", std::to_string(groups.total));
    for (const auto& g : groups.groups) {
      std::string name = "corpus_l" + std::to_string(g.length()) + ".bin";
      save_corpus(g, dir + "/" + name);
      m.set("corpus." + std::to_string(g.length()) + ".paths", std::to_string(g.size()));
      m.set("corpus." + std::to_string(g.length()) + ".checksum",
            to_hex(checksum_file(dir + "/" + name)));
    }
    save_manifest(m, dir + "/artifact.txt");
  });
}

void do_build_subgraph(const RunConfig& cfg, const LoadedData& data) {
  if (data.backgrounds.size() != 1)
    throw ConfigError("build-subgraph expects exactly one background graph");
  const KnowledgeGraph& bg = data.backgrounds[0];
  const AlignmentSet* align = find_target_alignment(data, bg.name, data.target.kg.name);
  if (!align)
    throw ConfigError("build-subgraph: no alignment between '" + bg.name + "' and '" +
                      data.target.kg.name + "'");
  AlignmentSet oriented = orient_background_left(*align, bg.name);
  LinkedSubgraph sub = build_linked_subgraph(bg, oriented, resolved_budget(cfg, data), cfg.seed);
  save_subgraph_artifact(sub, bg, data.target.kg,
                         static_cast<std::int64_t>(bg.triplets.size()), cfg.seed,
                         run_config_hash(cfg), out_path(cfg, "subgraph"));
}

void do_mine_rules(const RunConfig& cfg, const LoadedData& data) {
  MultiSourceCollection col = build_collection(data);
  col.validate(false);
  MergeResult merged = merge_aligned(col);
  std::vector<Rule> rules = mine_rules(merged.merged, cfg.rules);
  with_artifact_dir(out_path(cfg, "rules"), [&](const std::string& dir) {
    write_rule_report(rules, merged.merged, dir + "/rules.tsv", /*tsv=*/true);
    write_rule_report(rules, merged.merged, dir + "/rules.txt", /*tsv=*/false);
    Manifest m = base_manifest(cfg, "mine-rules");
    add_input_checksums(m, cfg);
    m.set("rules", std::to_string(rules.size()));
    m.set("max_body", std::to_string(cfg.rules.max_body));
    m.set("min_support", std::to_string(cfg.rules.min_support));
    {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.12g", cfg.rules.min_confidence);
      m.set("min_confidence", buf);
    }
    save_manifest(m, dir + "/artifact.txt");
  });
}

}  // namespace

LoadedData load_run_data(const RunConfig& cfg) {
  LoadedData data;
  data.target = load_dataset(cfg.target_name, cfg.target_train, cfg.target_valid,
                             cfg.target_test);
  std::unordered_map<std::string, KnowledgeGraph*> by_name;
  by_name.emplace(data.target.kg.name, &data.target.kg);
  data.backgrounds.reserve(cfg.backgrounds.size());
  for (const auto& bc : cfg.backgrounds) {
    KnowledgeGraph bg;
    bg.name = bc.name;
    load_triplets_into(bc.triplets, bg);
    data.backgrounds.push_back(std::move(bg));
  }
  for (auto& bg : data.backgrounds) by_name.emplace(bg.name, &bg);

  data.alignments.reserve(cfg.alignments.size());
  data.relation_maps.resize(cfg.alignments.size());
  for (std::size_t i = 0; i < cfg.alignments.size(); ++i) {
    const auto& ac = cfg.alignments[i];
    const KnowledgeGraph* left = by_name.at(ac.left);
    const KnowledgeGraph* right = by_name.at(ac.right);
    AlignmentSet a = load_alignment(ac.pairs, *left, *right);
    if (!ac.relation_map.empty())
      data.relation_maps[i] = load_relation_map(ac.relation_map, *left, *right);
    data.alignments.push_back(std::move(a));
  }

  // Leakage removal on every background aligned with the target, before
  // anything samples paths or subgraphs from it.
  data.leakage.resize(data.backgrounds.size());
  for (std::size_t b = 0; b < data.backgrounds.size(); ++b) {
    KnowledgeGraph& bg = data.backgrounds[b];
    for (std::size_t i = 0; i < data.alignments.size(); ++i) {
      const AlignmentSet& a = data.alignments[i];
      bool bg_left = a.left_kg == bg.name && a.right_kg == data.target.kg.name;
      bool bg_right = a.right_kg == bg.name && a.left_kg == data.target.kg.name;
      if (!bg_left && !bg_right) continue;
      AlignmentSet oriented = orient_background_left(a, bg.name);
      std::vector<std::pair<std::int32_t, std::int32_t>> rel_map = data.relation_maps[i];
      if (bg_right)
        for (auto& [x, y] : rel_map) std::swap(x, y);
      LeakageResult lr = remove_leakage(bg, data.target.split, oriented,
                                        rel_map.empty() ? nullptr : &rel_map);
      data.leakage[b].deleted += lr.report.deleted;
      data.leakage[b].deleted_triplets.insert(data.leakage[b].deleted_triplets.end(),
                                              lr.report.deleted_triplets.begin(),
                                              lr.report.deleted_triplets.end());
      bg = std::move(lr.kg);
    }
  }
  return data;
}

void save_subgraph_artifact(const LinkedSubgraph& sub, const KnowledgeGraph& background,
                            const KnowledgeGraph& target, std::int64_t full_graph_triplets,
                            std::uint64_t seed, const std::string& config_hash,
                            const std::string& dir) {
  with_artifact_dir(dir, [&](const std::string& tmp) {
    {
      std::ofstream out(tmp + "/entities.txt", std::ios::trunc);
      for (auto e : sub.entities) out << background.entities.name(e) << '\n';
    }
    {
      std::ofstream out(tmp + "/pairs.tsv", std::ios::trunc);
      for (auto [l, r] : sub.pairs)
        out << background.entities.name(l) << '\t' << target.entities.name(r) << '\n';
    }
    write_triplets_tsv(background, sub.sampled, tmp + "/triplets.tsv");
    Manifest m;
    m.set("format", "kgt.subgraph");
    m.set("version", "1");
    m.set("tool", kToolVersion);
    m.set("config_hash", config_hash);
    m.set("seed", std::to_string(seed));
    m.set("budget", std::to_string(sub.budget));
    m.set("background_triplets", std::to_string(full_graph_triplets));
    m.set("linked_triplets", std::to_string(sub.full.size()));
    m.set("core_triplets", std::to_string(sub.core.size()));
    m.set("sampled_triplets", std::to_string(sub.sampled.size()));
    m.set("entities", std::to_string(sub.entities.size()));
    m.set("aligned_pairs", std::to_string(sub.pairs.size()));
    m.set("shortfall", std::to_string(sub.shortfall));
    save_manifest(m, tmp + "/manifest.txt");
  });
}

LinkedSubgraph load_subgraph_artifact(const std::string& dir, const KnowledgeGraph& background,
                                      const KnowledgeGraph& target) {
  Manifest m = load_manifest(dir + "/manifest.txt");
  if (!m.has("format") || m.get("format") != "kgt.subgraph")
    throw DataError(dir + ": not a subgraph artifact");
  if (m.get("version") != "1") throw DataError(dir + ": unsupported subgraph version");
  LinkedSubgraph sub;
  sub.budget = std::stoll(m.get("budget"));
  sub.shortfall = std::stoll(m.get("shortfall"));

  auto entity_id = [&](const KnowledgeGraph& kg, const std::string& name) {
    auto id = kg.entities.find(name);
    if (!id)
      throw DataError(dir + ": entity '" + name + "' not found in graph '" + kg.name + "'");
    return *id;
  };
  {
    std::ifstream in(dir + "/entities.txt");
    if (!in) throw DataError(dir + ": missing entities.txt");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) sub.entities.push_back(entity_id(background, line));
  }
  {
    std::ifstream in(dir + "/pairs.tsv");
    if (!in) throw DataError(dir + ": missing pairs.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError(dir + ": malformed pairs.tsv line");
      sub.pairs.emplace_back(entity_id(background, line.substr(0, tab)),
                             entity_id(target, line.substr(tab + 1)));
    }
  }
  {
    std::ifstream in(dir + "/triplets.tsv");
    if (!in) throw DataError(dir + ": missing triplets.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto t1 = line.find('\t');
      auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos)
        throw DataError(dir + ": malformed triplets.tsv line");
      std::int32_t s = entity_id(background, line.substr(0, t1));
      std::string rel = line.substr(t1 + 1, t2 - t1 - 1);
      auto r = background.relations.find(rel);
      if (!r) throw DataError(dir + ": relation '" + rel + "' not found in background");
      std::int32_t o = entity_id(background, line.substr(t2 + 1));
      sub.sampled.push_back({s, *r, o});
    }
  }
  if (sub.sampled.size() != static_cast<std::size_t>(std::stoll(m.get("sampled_triplets"))))
    throw DataError(dir + ": sampled triplet count disagrees with the manifest");
  return sub;
}

void write_scenario_with_config(const TransferScenario& scenario, const std::string& dir,
                                const std::string& setting) {
  save_scenario(scenario, dir);
  RunConfig cfg;
  cfg.setting = setting;
  cfg.output_dir = dir + "/run";
  cfg.seed = scenario.config.seed;
  cfg.target_name = scenario.target.name;
  cfg.target_train = dir + "/target_train.tsv";
  cfg.target_valid = dir + "/target_valid.tsv";
  cfg.target_test = dir + "/target_test.tsv";
  // Negative sampling must stay below the smallest closed relation
  // vocabulary the config can be run with (the target alone, under "lp").
  auto n_rel = static_cast<std::int32_t>(scenario.target.relations.size());
  cfg.nce.k = std::min(cfg.nce.k, 2 * n_rel - 1);
  if (setting != "lp") {
    cfg.backgrounds.push_back({scenario.background.name, dir + "/background.tsv"});
    cfg.alignments.push_back({scenario.background.name, scenario.target.name,
                              dir + "/alignment.tsv", dir + "/relation_map.tsv"});
    cfg.has_pretrain = true;
    cfg.pretrain_epochs = cfg.train.epochs;
  } else {
    cfg.pretrain_epochs = cfg.train.epochs;
  }
  write_text(dir + "/config.json", render_run_config(cfg));
}

MetricsReport run_command(const RunConfig& cfg, const std::string& command) {
  echo_config(cfg);
  MetricsReport rep;
  if (command == "ingest") {
    do_ingest(cfg, load_run_data(cfg));
  } else if (command == "sample-paths") {
    do_sample_paths(cfg, load_run_data(cfg));
  } else if (command == "pretrain") {
    if (cfg.setting == "lp")
      throw ConfigError("pretrain requires background graphs (setting is 'lp')");
    LoadedData data = load_run_data(cfg);
    if (cfg.precision == Precision::f64)
      do_pretrain<double>(cfg, data);
    else
      do_pretrain<float>(cfg, data);
  } else if (command == "build-subgraph") {
    do_build_subgraph(cfg, load_run_data(cfg));
  } else if (command == "retrain") {
    LoadedData data = load_run_data(cfg);
    if (cfg.precision == Precision::f64)
      do_retrain<double>(cfg, data);
    else
      do_retrain<float>(cfg, data);
  } else if (command == "eval") {
    LoadedData data = load_run_data(cfg);
    rep = cfg.precision == Precision::f64 ? do_eval<double>(cfg, data)
                                          : do_eval<float>(cfg, data);
  } else if (command == "mine-rules") {
    do_mine_rules(cfg, load_run_data(cfg));
  } else if (command == "project") {
    if (cfg.precision == Precision::f64)
      do_project<double>(cfg);
    else
      do_project<float>(cfg);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return rep;
}

}  // namespace kgt
