#pragma once

// Configuration documents, manifests and the command implementations behind
// the `taudis` executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "taudis/core_model.hpp"
#include "taudis/simharness.hpp"
#include "taudis/strategies.hpp"

namespace taudis {

inline constexpr const char* kToolVersion = "1.0.0";

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitViolations = 1,
  kExitParseError = 2,
  kExitConfigError = 3,
  kExitInternalError = 4,
};

nlohmann::ordered_json config_to_json(const SelectionConfig& config);
/// Missing keys keep their defaults. Throws ConfigError on unknown values or wrong types.
SelectionConfig config_from_json(const nlohmann::json& doc);
SelectionConfig read_config_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of the compact JSON dump of the resolved config.
std::string config_hash(const SelectionConfig& config);

struct SelectionManifest {
  SelectionConfig config;
  int round = 1;
  StrategyOutput output;
  double duration_ms = 0.0;
};

/// Pretty JSON; `duration_ms` is the last line before the closing brace so it
/// can be excluded when comparing runs.
std::string manifest_to_string(const SelectionManifest& manifest);

/// CSV header and rows for the score command. `metrics` selects columns among
/// cm, ce, se, avg_cm, wce, wse; empty selects all.
void write_score_table(std::ostream& out, const PredictionPool& pool,
                       const std::vector<std::string>& metrics);

/// Formats a double with the shortest round-trip representation.
std::string format_double(double v);

// Command entry points. Each returns an ExitCode and reports errors on `err`.

struct ScoreOptions {
  std::filesystem::path input;
  std::filesystem::path output;  // empty writes to `out`
  std::vector<std::string> metrics;
};
int run_score(const ScoreOptions& options, std::ostream& out, std::ostream& err);

struct SelectOverrides {
  std::optional<std::string> strategy;
  std::optional<int> budget;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
  bool derive_multipliers = false;
};

struct SelectOptions {
  std::filesystem::path input;
  std::filesystem::path config;  // empty uses defaults
  std::filesystem::path labeled;  // empty means nothing is labeled
  std::filesystem::path output;   // empty writes to `out`
  int round = 1;
  SelectOverrides overrides;
};
int run_select(const SelectOptions& options, std::ostream& out, std::ostream& err);

struct CoverOptions {
  std::filesystem::path problem;      // CoverProblem JSON to solve
  std::filesystem::path predictions;  // alternatively, build the problem from predictions
  std::filesystem::path config;
  std::filesystem::path labeled;
  std::filesystem::path dump_problem;
  std::filesystem::path output;
  std::optional<std::size_t> k;
  std::string algorithm = "greedy";
  std::size_t partitions = 4;
  std::uint64_t seed = 0;
  SelectOverrides overrides;
};
int run_cover(const CoverOptions& options, std::ostream& out, std::ostream& err);

struct SimulateOptions {
  std::filesystem::path spec;    // empty uses defaults
  std::filesystem::path config;  // empty uses defaults
  std::vector<std::string> strategies;
  std::filesystem::path output_json;
  std::filesystem::path output_csv;
  std::optional<std::uint64_t> seed;
};
int run_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);

int run_validate(const std::filesystem::path& input, std::ostream& out, std::ostream& err);

/// Parses the simulation-only config keys (gamma, initial_labeled_fraction) next to
/// the selection config.
SimulationOptions simulation_options_from_json(const nlohmann::json& doc);

}  // namespace taudis
