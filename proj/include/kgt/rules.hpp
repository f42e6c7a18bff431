#pragma once

#include <string>

#include "kgt/kg.hpp"

namespace kgt {

// Horn rule body shapes over head variables (X, Y) and one join variable Z.
enum class RuleShape {
  direct,         // b(X,Y)
  inverse,        // b(Y,X)
  chain,          // b1(X,Z) ^ b2(Z,Y)
  inverse_chain,  // b1(Z,X) ^ b2(Y,Z)
  common_parent,  // b1(Z,X) ^ b2(Z,Y)
  common_child    // b1(X,Z) ^ b2(Y,Z)
};

struct Rule {
  std::int32_t head = -1;
  RuleShape shape = RuleShape::direct;
  std::int32_t body1 = -1;
  std::int32_t body2 = -1;  // unused for 1-hop shapes
  std::int64_t support = 0;
  std::int64_t body_support = 0;
  double confidence = 0.0;
};

struct RuleMinerConfig {
  int max_body = 2;  // 1: single-atom bodies only; 2: adds two-atom shapes
  std::int64_t min_support = 2;
  double min_confidence = 0.5;
};

// Exact mining of cross-graph rules on a merged graph whose relation labels
// are namespaced "graph:relation". Support counts distinct (X, Y) pairs
// grounding head and body; body_support those grounding the body. Only
// rules whose body namespace (shared by both atoms) differs from the head's
// are emitted. Sorted by confidence, then support, then label.
std::vector<Rule> mine_rules(const KnowledgeGraph& joint, const RuleMinerConfig& config);

std::string rule_namespace(const std::string& relation_label);
std::string format_rule(const Rule& rule, const KnowledgeGraph& joint);
void write_rule_report(const std::vector<Rule>& rules, const KnowledgeGraph& joint,
                       const std::string& path, bool tsv);

}  // namespace kgt
