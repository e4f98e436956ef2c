#include "taudis/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "taudis/maxcover.hpp"
#include "taudis/uncertainty.hpp"

namespace taudis {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) { return fmt::format("{}", v); }

// ---------------------------------------------------------------------------
// Config

ordered_json config_to_json(const SelectionConfig& config) {
  return {
      {"strategy", to_string(config.strategy)},
      {"budget", config.budget},
      {"rounds", config.rounds},
      {"alpha", config.alpha},
      {"beta", config.beta},
      {"sigma", config.sigma},
      {"seed", config.seed},
      {"instance_metric", to_string(config.instance_metric)},
      {"cover_algorithm", to_string(config.cover_algorithm)},
      {"partitions", config.partitions},
  };
}

namespace {

// Keys read by simulation_options_from_json; tolerated in a selection config.
bool is_simulation_key(const std::string& key) {
  return key == "gamma" || key == "initial_labeled_fraction";
}

}  // namespace

SelectionConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  SelectionConfig config;
  for (const auto& [key, value] : doc.items()) {
    auto need = [&](bool ok, const char* what) {
      if (!ok) throw ConfigError(fmt::format("config key '{}' must be {}", key, what));
    };
    if (key == "strategy") {
      need(value.is_string(), "a string");
      config.strategy = parse_strategy(value.get<std::string>());
    } else if (key == "budget") {
      need(value.is_number_integer(), "an integer");
      config.budget = value.get<int>();
    } else if (key == "rounds") {
      need(value.is_number_integer(), "an integer");
      config.rounds = value.get<int>();
    } else if (key == "alpha") {
      need(value.is_number(), "a number");
      config.alpha = value.get<double>();
    } else if (key == "beta") {
      need(value.is_number(), "a number");
      config.beta = value.get<double>();
    } else if (key == "sigma") {
      need(value.is_number(), "a number");
      config.sigma = value.get<double>();
    } else if (key == "seed") {
      need(value.is_number_unsigned(), "a non-negative integer");
      config.seed = value.get<std::uint64_t>();
    } else if (key == "instance_metric") {
      need(value.is_string(), "a string");
      config.instance_metric = parse_instance_metric(value.get<std::string>());
    } else if (key == "cover_algorithm") {
      need(value.is_string(), "a string");
      config.cover_algorithm = parse_cover_algorithm(value.get<std::string>());
    } else if (key == "partitions") {
      need(value.is_number_integer(), "an integer");
      config.partitions = value.get<int>();
    } else if (!is_simulation_key(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return config;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
  return doc;
}

}  // namespace

SelectionConfig read_config_file(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

SimulationOptions simulation_options_from_json(const json& doc) {
  SimulationOptions options;
  options.selection = config_from_json(doc);
  if (!doc.contains("rounds")) options.selection.rounds = 0;
  if (doc.contains("gamma")) {
    if (!doc["gamma"].is_number()) throw ConfigError("config key 'gamma' must be a number");
    options.gamma = doc["gamma"].get<double>();
  }
  if (doc.contains("initial_labeled_fraction")) {
    if (!doc["initial_labeled_fraction"].is_number()) {
      throw ConfigError("config key 'initial_labeled_fraction' must be a number");
    }
    options.initial_fraction = doc["initial_labeled_fraction"].get<double>();
  }
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(options.initial_fraction >= 0.0 && options.initial_fraction < 1.0)) {
    throw ConfigError("initial_labeled_fraction must lie in [0, 1)");
  }
  return options;
}

std::string config_hash(const SelectionConfig& config) {
  const std::string text = config_to_json(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

// ---------------------------------------------------------------------------
// Manifest and score table

std::string manifest_to_string(const SelectionManifest& manifest) {
  const auto& diag = manifest.output.diagnostics;
  ordered_json doc;
  doc["tool"] = "taudis";
  doc["version"] = kToolVersion;
  doc["strategy"] = to_string(manifest.config.strategy);
  doc["config"] = config_to_json(manifest.config);
  doc["config_hash"] = config_hash(manifest.config);
  doc["round"] = manifest.round;
  doc["selected_images"] = manifest.output.selected_images;
  ordered_json d;
  d["candidate_count"] = diag.candidate_instances;
  d["diverse_count"] = diag.diverse_instances;
  d["coverage"] = diag.coverage;
  d["universe_size"] = diag.universe_size;
  d["diverse_ids"] = diag.diverse_ids;
  d["votes"] = ordered_json::object();
  for (const auto& [id, n] : diag.votes) d["votes"][id] = n;
  d["warnings"] = diag.warnings;
  doc["diagnostics"] = std::move(d);
  doc["duration_ms"] = manifest.duration_ms;
  return doc.dump(2) + "\n";
}

void write_score_table(std::ostream& out, const PredictionPool& pool,
                       const std::vector<std::string>& metrics) {
  static const std::vector<std::string> kAll = {"cm", "ce", "se", "avg_cm", "wce", "wse"};
  const std::vector<std::string>& columns = metrics.empty() ? kAll : metrics;
  for (const auto& c : columns) {
    if (std::find(kAll.begin(), kAll.end(), c) == kAll.end()) throw ConfigError("unknown metric '" + c + "'");
  }
  out << "level,image_id,instance_id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';

  const bool has_margin = pool.num_classes() >= 2;
  for (const auto& img : pool.images()) {
    out << "image," << img.image_id << ',';
    for (const auto& c : columns) {
      out << ',';
      if (c == "avg_cm" && (has_margin || img.instances.empty())) {
        out << format_double(average_classification_margin(img).value);
      } else if (c == "wce") {
        out << format_double(weighted_classification_entropy(img).value);
      } else if (c == "wse") {
        out << format_double(weighted_segmentation_entropy(img).value);
      }
    }
    out << '\n';
    for (const auto& inst : img.instances) {
      out << "instance," << img.image_id << ',' << inst.instance_id;
      for (const auto& c : columns) {
        out << ',';
        if (c == "cm" && has_margin) {
          out << format_double(classification_margin(inst.class_probs).value);
        } else if (c == "ce") {
          out << format_double(classification_entropy(inst.class_probs).value);
        } else if (c == "se") {
          out << format_double(inst.seg_entropy);
        }
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::filesystem::path& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
  file << text;
}

// Maps exceptions onto the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const IngestError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParseError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << '\n';
    return kExitParseError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
}

PredictionPool load_pool(const std::filesystem::path& path) {
  try {
    return ingest_prediction_file(path);
  } catch (const IngestError& e) {
    throw IngestError(e.line(), path.string() + ": " + e.what());
  }
}

SelectionConfig resolve_config(const std::filesystem::path& path, const SelectOverrides& o,
                               const PredictionPool& pool, const IdSet& labeled) {
  SelectionConfig config = path.empty() ? SelectionConfig{} : read_config_file(path);
  if (o.strategy) config.strategy = parse_strategy(*o.strategy);
  if (o.budget) config.budget = *o.budget;
  if (o.alpha) config.alpha = *o.alpha;
  if (o.beta) config.beta = *o.beta;
  if (o.sigma) config.sigma = *o.sigma;
  if (o.seed) config.seed = *o.seed;
  if (o.derive_multipliers) {
    const Multipliers m = derive_multipliers(pool, labeled);
    config.alpha = m.alpha;
    config.beta = m.beta;
  }
  validate_config(config);
  return config;
}

}  // namespace

int run_score(const ScoreOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const PredictionPool pool = load_pool(options.input);
    std::ostringstream table;
    write_score_table(table, pool, options.metrics);
    emit(options.output, table.str(), out);
    return kExitOk;
  });
}

int run_select(const SelectOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const PredictionPool pool = load_pool(options.input);
    const IdSet labeled = options.labeled.empty() ? IdSet{} : read_id_list(options.labeled);
    SelectionManifest manifest;
    manifest.config = resolve_config(options.config, options.overrides, pool, labeled);
    manifest.round = options.round;
    const PoolState state = make_pool_state(pool, labeled);
    const auto start = std::chrono::steady_clock::now();
    manifest.output = select_batch(pool, state, manifest.config);
    manifest.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    emit(options.output, manifest_to_string(manifest), out);
    return kExitOk;
  });
}

int run_cover(const CoverOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.problem.empty() == options.predictions.empty()) {
      throw ConfigError("cover needs exactly one of --problem or --predictions");
    }
    const CoverAlgorithm algorithm = parse_cover_algorithm(options.algorithm);
    CoverProblem problem;
    std::optional<std::size_t> k = options.k;
    if (!options.problem.empty()) {
      const std::string text = read_text_file(options.problem);
      ordered_json doc = ordered_json::parse(text, nullptr, false);
      if (doc.is_discarded()) throw IngestError(0, options.problem.string() + ": not valid JSON");
      problem = cover_problem_from_json(doc);
    } else {
      const PredictionPool pool = load_pool(options.predictions);
      const IdSet labeled = options.labeled.empty() ? IdSet{} : read_id_list(options.labeled);
      const SelectionConfig config = resolve_config(options.config, options.overrides, pool, labeled);
      InstanceCoverProblem built = build_instance_cover_problem(pool, make_pool_state(pool, labeled), config);
      problem = std::move(built.problem);
      if (!k) k = built.k;
    }
    if (!options.dump_problem.empty()) {
      emit(options.dump_problem, cover_problem_to_json(problem).dump(2) + "\n", out);
    }
    if (!k) throw ConfigError("--k is required when solving a problem file");
    if (*k < 1) throw ConfigError("--k must be at least 1");
    if (algorithm == CoverAlgorithm::kPartitioned && options.partitions < 2) {
      throw ConfigError("--partitions must be at least 2");
    }
    const CoverSolution solution = solve_max_cover(problem, *k, algorithm, options.partitions, options.seed);
    emit(options.output, cover_solution_to_json(problem, solution).dump(2) + "\n", out);
    return kExitOk;
  });
}

int run_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SyntheticPoolSpec spec;
    if (!options.spec.empty()) {
      try {
        spec = spec_from_json(read_json_file(options.spec));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    SimulationOptions sim = options.config.empty() ? simulation_options_from_json(json::object())
                                                   : simulation_options_from_json(read_json_file(options.config));
    if (options.seed) sim.selection.seed = *options.seed;
    std::vector<StrategyKind> strategies;
    const std::vector<std::string> names =
        options.strategies.empty() ? std::vector<std::string>{"taudis", "wse", "random"} : options.strategies;
    for (const auto& name : names) strategies.push_back(parse_strategy(name));

    SimulationReport report;
    try {
      report = run_simulation(spec, sim, strategies);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    ordered_json doc;
    doc["tool"] = "taudis";
    doc["version"] = kToolVersion;
    doc["spec"] = spec_to_json(spec);
    ordered_json cfg = config_to_json(sim.selection);
    cfg["rounds"] = report.rounds;
    cfg["gamma"] = sim.gamma;
    cfg["initial_labeled_fraction"] = sim.initial_fraction;
    doc["config"] = std::move(cfg);
    doc["report"] = report_to_json(report);
    emit(options.output_json, doc.dump(2) + "\n", out);
    if (!options.output_csv.empty()) emit(options.output_csv, report_to_csv(report), out);
    return kExitOk;
  });
}

int run_validate(const std::filesystem::path& input, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ValidationReport report = validate_prediction_file(input);
    out << fmt::format("{}: {} images, {} instances, {} violations\n", input.string(), report.images,
                       report.instances, report.violations.size());
    for (const auto& v : report.violations) {
      out << "line " << v.line << ": ";
      if (!v.instance_id.empty()) out << "instance '" << v.instance_id << "': ";
      out << v.message << '\n';
    }
    return report.clean() ? kExitOk : kExitViolations;
  });
}

}  // namespace taudis
