#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgt/distill.hpp"
#include "kgt/nn.hpp"
#include "kgt/objective.hpp"
#include "kgt/paths.hpp"
#include "kgt/rules.hpp"
#include "kgt/trainer.hpp"

namespace kgt {

// One declarative document per run; commands only pick the config path and
// an optional seed override. Unknown keys are errors, violations report the
// field path, and the fully resolved document is echoed into the output
// directory so every artifact is self-describing.
struct RunConfig {
  int version = 1;
  std::string setting = "lp";  // lp | joint-lp | pr4lp
  std::string output_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  Precision precision = Precision::f32;

  std::string target_name = "target";
  std::string target_train, target_valid, target_test;
  struct BackgroundConfig {
    std::string name, triplets;
  };
  std::vector<BackgroundConfig> backgrounds;
  struct AlignmentConfig {
    std::string left, right, pairs, relation_map;  // relation_map optional
  };
  std::vector<AlignmentConfig> alignments;

  EncoderConfig encoder;
  WalkConfig walk;
  NceConfig nce;
  TrainConfig train;
  bool has_pretrain = false;
  int pretrain_epochs = -1;  // resolved: train.epochs when the block omits it
  std::string teacher_checkpoint;
  std::int64_t budget = -1;  // resolved at runtime: |target train| when -1
  DistillConfig distill;
  std::string eval_filter = "train";  // train | all
  RuleMinerConfig rules;
};

// Parses and validates a JSON document; every violation is collected and the
// combined report is thrown as a ConfigError (one line per field path).
RunConfig parse_run_config(const std::string& json_text);

// Reads the file, parses, then (optionally) checks that every referenced
// input path exists.
RunConfig load_run_config(const std::string& path, bool check_paths = true);

// Canonical resolved echo: defaults filled, keys sorted, stable float
// rendering. Byte-identical for equal configs.
std::string render_run_config(const RunConfig& cfg);

// Hash of the canonical echo, used in artifact manifests.
std::string run_config_hash(const RunConfig& cfg);

}  // namespace kgt
