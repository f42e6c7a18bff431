#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kgt/pipeline.hpp"

namespace {

int dispatch(const std::string& command, const std::string& config_path, bool has_seed,
             std::uint64_t seed, bool has_threads, int threads) {
  kgt::RunConfig cfg = kgt::load_run_config(config_path);
  if (has_seed) {
    cfg.seed = seed;
    cfg.train.seed = seed;
  }
  if (has_threads) cfg.threads = threads;
  kgt::MetricsReport rep = kgt::run_command(cfg, command);
  if (command == "eval") {
    std::cout << "setting " << rep.setting << '\n'
              << "queries " << rep.query_count << '\n'
              << "mrr " << rep.mrr << '\n'
              << "hits1 " << rep.hits1 << '\n'
              << "hits10 " << rep.hits10 << '\n'
              << "mean_candidates " << rep.mean_candidates << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph transfer learning: joint pre-training, local re-training, "
               "filtered link-prediction evaluation, and rule mining."};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  bool has_seed = false, has_threads = false;

  auto add_run_command = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("-c,--config", config_path, "run configuration document (JSON)")
        ->required();
    cmd->add_option("--seed", seed, "override the configured seed")
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--threads", threads, "override the configured thread count")
        ->each([&](const std::string&) { has_threads = true; });
    return cmd;
  };

  add_run_command("ingest", "validate inputs and materialize binary graph artifacts");
  add_run_command("sample-paths", "sample and augment the training path corpus");
  add_run_command("pretrain", "jointly pre-train the teacher over the linked collection");
  add_run_command("build-subgraph", "extract and sample the linked background subgraph");
  add_run_command("retrain", "train the student on the target graph (with optional teacher)");
  add_run_command("eval", "filtered link-prediction metrics on the test split");
  add_run_command("mine-rules", "mine cross-graph rules from the merged joint graph");
  add_run_command("project", "project entity embeddings to two dimensions");

  // Fixture generation takes its parameters directly: no config document.
  CLI::App* gen = app.add_subcommand("gen-scenario",
                                     "generate a synthetic transfer scenario with a planted "
                                     "compositional rule");
  std::string gen_out;
  std::string gen_setting = "pr4lp";
  kgt::ScenarioConfig sc;
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  gen->add_option("--entities", sc.n_entities, "number of entities per graph");
  gen->add_option("--relations", sc.n_relations, "number of base relations (multiple of 3)");
  gen->add_option("--alignment-fraction", sc.alignment_fraction, "aligned entity fraction");
  gen->add_option("--confidence", sc.planted_confidence, "planted rule confidence");
  gen->add_option("--edge-keep", sc.target_edge_keep, "target edge keep probability");
  gen->add_option("--heldout", sc.heldout_fraction, "held-out fraction (valid+test)");
  gen->add_option("--seed", sc.seed, "generation seed");
  gen->add_option("--setting", gen_setting, "setting for the emitted config document")
      ->check(CLI::IsMember({"lp", "joint-lp", "pr4lp"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      kgt::TransferScenario scenario = kgt::generate_transfer_scenario(sc);
      kgt::write_scenario_with_config(scenario, gen_out, gen_setting);
      std::cout << "scenario written to " << gen_out << '\n';
      return 0;
    }
    for (const auto* cmd : app.get_subcommands())
      return dispatch(cmd->get_name(), config_path, has_seed, seed, has_threads, threads);
    return 1;
  } catch (const kgt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const kgt::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const kgt::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
}
