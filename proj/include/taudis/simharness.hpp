#pragma once

// Synthetic planted-cluster pools, a mock predictor and the multi-round
// simulation loop used to compare strategies without training a model.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "taudis/core_model.hpp"

namespace taudis {

struct SyntheticPoolSpec {
  int num_images = 200;
  int min_instances = 1;
  int max_instances = 4;
  int num_clusters = 20;
  // Expected cosine similarity between two instances of the same cluster.
  double intra_similarity = 0.95;
  // Generated cross-cluster similarities must stay below this bound.
  double max_inter_similarity = 0.5;
  // Probability that an instance belongs to its image's scene cluster rather
  // than a uniformly drawn one.
  double scene_purity = 1.0;
  int embedding_dim = 32;
  int num_classes = 4;
  // Clusters [0, uncertain_clusters) draw SE from the high range, the rest from the low range.
  int uncertain_clusters = 5;
  double high_se_min = 0.45;
  double high_se_max = 0.69;
  double low_se_min = 0.02;
  double low_se_max = 0.40;
  int mask_size = 4;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticPoolSpec&, const SyntheticPoolSpec&) = default;
};

struct SyntheticPool {
  PredictionPool pool;
  std::map<std::string, int, std::less<>> cluster_of;      // instance id -> planted cluster
  std::map<std::string, double, std::less<>> base_entropy;  // instance id -> SE before any labels
  int num_clusters = 0;
};

/// Deterministic given spec.seed. Throws std::invalid_argument for an invalid spec or a
/// separation that cannot be realised (more clusters than dimensions, or
/// intra_similarity <= max_inter_similarity).
SyntheticPool generate_pool(const SyntheticPoolSpec& spec);

/// Constant-valued mask whose segmentation entropy equals `target` (clamped to [0, ln 2]).
Mask constant_mask_for_entropy(double target, int size);

/// Scales each unlabeled instance's SE by gamma^c, c = labeled instances in its cluster.
/// Embeddings are untouched. Throws std::invalid_argument unless 0 < gamma < 1.
PredictionPool mock_predictor(const SyntheticPool& synthetic, const IdSet& labeled, double gamma);

struct RoundMetrics {
  int round = 0;
  std::size_t labeled = 0;
  std::size_t selected = 0;
  double cluster_coverage = 0.0;
  double redundancy = 0.0;
  double mean_pool_uncertainty = 0.0;
};

/// Fraction of the clusters present in the pool with at least one labeled instance.
double cluster_coverage(const SyntheticPool& synthetic, const IdSet& labeled);

struct SimulationOptions {
  SelectionConfig selection;  // rounds <= 0 means "enough rounds to select 90% of D_U"
  double gamma = 0.5;
  double initial_fraction = 0.25;
};

struct SimulationReport {
  int rounds = 0;
  std::vector<std::string> initial_labeled;
  std::map<std::string, std::vector<RoundMetrics>> per_strategy;
};

/// Rounds needed for at least 90% of `unlabeled` images to be selected with batch `budget`.
int default_rounds(std::size_t unlabeled, int budget);

/// Seeded initial labeled set, shared by all strategies.
IdSet initial_labeled_set(const PredictionPool& pool, double fraction, std::uint64_t seed);

/// Runs every strategy from the same initial labeled set. Round 0 records the initial state.
SimulationReport run_simulation(const SyntheticPoolSpec& spec, const SimulationOptions& options,
                                const std::vector<StrategyKind>& strategies);

nlohmann::ordered_json spec_to_json(const SyntheticPoolSpec& spec);
SyntheticPoolSpec spec_from_json(const nlohmann::json& doc);
nlohmann::ordered_json report_to_json(const SimulationReport& report);
/// Flat CSV with columns round,strategy,metric,value.
std::string report_to_csv(const SimulationReport& report);

}  // namespace taudis
