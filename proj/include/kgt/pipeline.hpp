#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgt/config.hpp"
#include "kgt/eval.hpp"
#include "kgt/fixtures.hpp"
#include "kgt/kg_io.hpp"
#include "kgt/subgraph.hpp"

namespace kgt {

inline constexpr const char* kToolVersion = "kgt 1.0.0";

// Everything a run references, loaded and cross-validated. Backgrounds are
// stored post leakage removal; the reports record what was deleted.
struct LoadedData {
  Dataset target;
  std::vector<KnowledgeGraph> backgrounds;
  std::vector<LeakageReport> leakage;
  std::vector<AlignmentSet> alignments;  // oriented as configured
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> relation_maps;
};

LoadedData load_run_data(const RunConfig& cfg);

// Dispatches one pipeline command. Artifacts land under cfg.output_dir; a
// failed command leaves its partial output quarantined in a ".partial"
// directory instead of replacing the previous artifact. `eval` additionally
// returns the report; other commands return an empty one.
MetricsReport run_command(const RunConfig& cfg, const std::string& command);

// Subgraph artifact directory (entities, pairs, triplets, manifest) in
// human-readable form; ids are rebuilt against the given graphs on load.
void save_subgraph_artifact(const LinkedSubgraph& sub, const KnowledgeGraph& background,
                            const KnowledgeGraph& target, std::int64_t full_graph_triplets,
                            std::uint64_t seed, const std::string& config_hash,
                            const std::string& dir);
LinkedSubgraph load_subgraph_artifact(const std::string& dir, const KnowledgeGraph& background,
                                      const KnowledgeGraph& target);

// Scenario generation used by the gen-scenario command and the test fixtures:
// emits the scenario TSVs plus a ready-to-run config document next to them.
void write_scenario_with_config(const TransferScenario& scenario, const std::string& dir,
                                const std::string& setting);

}  // namespace kgt
