#pragma once

#include "kgt/kg.hpp"

namespace kgt {

// Synthetic two-graph transfer scenario. The background graph carries full
// composition chains ra(X,Y) ^ rb(Y,Z) plus rc(X,Z) heads for most composed
// pairs; the target graph mirrors the chain structure sparsely (so the
// background genuinely knows more) and holds out a slice of its tc heads as
// validation/test queries. Held-out pairs never receive a background rc
// edge, in either orientation, which keeps the scenario leakage-free while
// every test triplet stays derivable through background 2-hop paths when its
// endpoints are aligned.
struct ScenarioConfig {
  std::int32_t n_entities = 100;
  std::int32_t n_relations = 3;  // multiple of 3: one (ra, rb, rc) family per 3
  double alignment_fraction = 0.5;
  double planted_confidence = 0.9;
  double target_edge_keep = 0.5;
  double heldout_fraction = 0.2;  // split evenly between valid and test
  std::uint64_t seed = 0;
};

struct ScenarioAudit {
  std::int64_t test_total = 0;
  std::int64_t derivable_test = 0;   // via exhaustive background 2-hop join
  std::int64_t leakage_deletions = 0;  // mapped-mode audit; zero by construction
  double planted_rule_confidence = 0.0;  // family-0 rule on the merged joint graph
  std::int64_t rule_support = 0;
  std::int64_t rule_body_support = 0;
};

struct TransferScenario {
  KnowledgeGraph background;
  KnowledgeGraph target;  // union of all three split parts
  DatasetSplit split;
  AlignmentSet alignment;  // background -> target
  std::vector<std::pair<std::int32_t, std::int32_t>> relation_map;  // (rc, tc) per family
  ScenarioAudit audit;
  ScenarioConfig config;
};

TransferScenario generate_transfer_scenario(const ScenarioConfig& config);

// Emits the standard TSV files (background, target train/valid/test,
// alignment, relation map) plus an audit manifest.
void save_scenario(const TransferScenario& scenario, const std::string& dir);

}  // namespace kgt
