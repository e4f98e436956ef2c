// taudis: batch selection for active learning on instance segmentation predictions.

#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "taudis/io.hpp"

namespace {

void add_selection_flags(CLI::App* cmd, taudis::SelectOverrides& o) {
  cmd->add_option("--strategy", o.strategy,
                  "taudis|taudis_img|random|avg_cm|wce|wse|coreset|round_robin");
  cmd->add_option("--budget", o.budget, "Images per round (B)");
  cmd->add_option("--alpha", o.alpha, "Instance oversampling multiplier");
  cmd->add_option("--beta", o.beta, "Instance downsampling multiplier");
  cmd->add_option("--sigma", o.sigma, "Cosine similarity threshold in (0, 1)");
  cmd->add_option("--seed", o.seed, "Seed for randomized choices");
  cmd->add_flag("--derive-multipliers", o.derive_multipliers,
                "Set alpha and beta from the labeled images' mean instance count");
}

void configure_threads(int requested) {
  if (requested > 0) {
    omp_set_num_threads(requested);
    return;
  }
  if (const char* env = std::getenv("TAUDIS_NUM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning batch selection for instance segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: $TAUDIS_NUM_THREADS or all cores)");
  app.set_version_flag("--version", taudis::kToolVersion);

  taudis::ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Per-instance and per-image uncertainty table (CSV)");
  score_cmd->add_option("input", score.input, "Prediction file (JSON Lines, optionally gzip)")->required();
  score_cmd->add_option("-o,--output", score.output, "CSV output path (default: stdout)");
  score_cmd->add_option("--metrics", score.metrics, "Columns among cm,ce,se,avg_cm,wce,wse")->delimiter(',');

  taudis::SelectOptions select;
  auto* select_cmd = app.add_subcommand("select", "Run one selection round and write a manifest");
  select_cmd->add_option("input", select.input, "Prediction file")->required();
  select_cmd->add_option("-c,--config", select.config, "Selection config JSON");
  select_cmd->add_option("-l,--labeled", select.labeled, "Newline-delimited labeled image ids");
  select_cmd->add_option("-o,--output", select.output, "Manifest output path (default: stdout)");
  select_cmd->add_option("--round", select.round, "Round index recorded in the manifest");
  add_selection_flags(select_cmd, select.overrides);

  taudis::CoverOptions cover;
  auto* cover_cmd = app.add_subcommand("cover", "Solve (or build and dump) a maximum k-cover problem");
  cover_cmd->add_option("--problem", cover.problem, "Cover problem JSON to solve");
  cover_cmd->add_option("--predictions", cover.predictions, "Build the problem from a prediction file");
  cover_cmd->add_option("-c,--config", cover.config, "Selection config JSON (with --predictions)");
  cover_cmd->add_option("-l,--labeled", cover.labeled, "Labeled image ids (with --predictions)");
  cover_cmd->add_option("--dump-problem", cover.dump_problem, "Write the cover problem JSON here");
  cover_cmd->add_option("-o,--output", cover.output, "Solution output path (default: stdout)");
  cover_cmd->add_option("--k", cover.k, "Number of subsets to pick");
  cover_cmd->add_option("--algo", cover.algorithm, "greedy|lazy|partitioned|brute");
  cover_cmd->add_option("--partitions", cover.partitions, "Groups for the partitioned solver");
  cover_cmd->add_option("--seed", cover.seed, "Seed for the partitioned solver");
  cover_cmd->add_option("--budget", cover.overrides.budget, "Images per round (B)");
  cover_cmd->add_option("--alpha", cover.overrides.alpha, "Instance oversampling multiplier");
  cover_cmd->add_option("--beta", cover.overrides.beta, "Instance downsampling multiplier");
  cover_cmd->add_option("--sigma", cover.overrides.sigma, "Cosine similarity threshold");

  taudis::SimulateOptions simulate;
  auto* sim_cmd = app.add_subcommand("simulate", "Multi-round simulation on a synthetic pool");
  sim_cmd->add_option("--spec", simulate.spec, "Synthetic pool spec JSON");
  sim_cmd->add_option("-c,--config", simulate.config, "Selection/simulation config JSON");
  sim_cmd->add_option("--strategies", simulate.strategies, "Comma-separated strategy names")->delimiter(',');
  sim_cmd->add_option("-o,--output", simulate.output_json, "Metrics JSON path (default: stdout)");
  sim_cmd->add_option("--csv", simulate.output_csv, "Flat CSV path (round,strategy,metric,value)");
  sim_cmd->add_option("--seed", simulate.seed, "Override the config seed");

  std::string validate_input;
  auto* validate_cmd = app.add_subcommand("validate", "Check a prediction file and list every violation");
  validate_cmd->add_option("input", validate_input, "Prediction file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? taudis::kExitOk : taudis::kExitConfigError;
  }
  configure_threads(threads);

  if (*score_cmd) return taudis::run_score(score, std::cout, std::cerr);
  if (*select_cmd) return taudis::run_select(select, std::cout, std::cerr);
  if (*cover_cmd) return taudis::run_cover(cover, std::cout, std::cerr);
  if (*sim_cmd) return taudis::run_simulate(simulate, std::cout, std::cerr);
  if (*validate_cmd) return taudis::run_validate(validate_input, std::cout, std::cerr);
  return taudis::kExitInternalError;
}
