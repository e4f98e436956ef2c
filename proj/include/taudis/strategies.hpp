#pragma once

// Image batch-selection strategies. Every strategy returns min(B, |unlabeled|)
// distinct unlabeled image ids and is a pure function of its inputs.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "taudis/core_model.hpp"
#include "taudis/maxcover.hpp"
#include "taudis/uncertainty.hpp"

namespace taudis {

struct SelectionDiagnostics {
  std::size_t candidate_instances = 0;  // |T_C| (or |D_C| for the image-level variant)
  std::size_t diverse_instances = 0;    // |T_D|
  std::size_t coverage = 0;
  std::size_t universe_size = 0;
  std::vector<std::string> diverse_ids;     // T_D in pick order
  std::map<std::string, int> votes;         // n_D per image with n_D > 0
  std::vector<std::string> warnings;
};

struct StrategyOutput {
  std::vector<std::string> selected_images;
  SelectionDiagnostics diagnostics;
};

/// An instance together with its score under the configured metric.
struct RankedInstance {
  const InstancePrediction* instance = nullptr;
  UncertaintyScore score;
};

/// Every instance of the unlabeled images, most uncertain first; ties by instance id.
std::vector<RankedInstance> rank_unlabeled_instances(const PredictionPool& pool,
                                                     const PoolState& state,
                                                     InstanceMetric metric);

struct InstanceCoverProblem {
  std::vector<RankedInstance> ranked;  // candidate c is ranked[c]
  CoverProblem problem;
  std::size_t k = 0;  // floor(beta * B)
};

/// Steps 1-2 of the instance-level strategy: the top floor(alpha * B) instances as
/// candidates against every unlabeled instance, thresholded at sigma.
InstanceCoverProblem build_instance_cover_problem(const PredictionPool& pool, const PoolState& state,
                                                  const SelectionConfig& config);

/// Images ranked by n_D descending, then summed SE of their voted instances descending,
/// then id ascending. Shortfalls are filled with the highest-WSE unlabeled images.
std::vector<std::string> majority_vote(const std::vector<const InstancePrediction*>& diverse,
                                       std::size_t budget, const PredictionPool& pool,
                                       const PoolState& state,
                                       std::map<std::string, int>* votes = nullptr);

StrategyOutput taudis_select(const PredictionPool& pool, const PoolState& state,
                             const SelectionConfig& config);
StrategyOutput taudis_img_select(const PredictionPool& pool, const PoolState& state,
                                 const SelectionConfig& config);
StrategyOutput random_select(const PoolState& state, std::size_t budget, std::uint64_t seed);
/// `metric` must be one of kAvgCm, kWce, kWse.
StrategyOutput uncertainty_select(const PredictionPool& pool, const PoolState& state,
                                  StrategyKind metric, std::size_t budget);
StrategyOutput coreset_select(const PredictionPool& pool, const PoolState& state,
                              std::size_t budget);
StrategyOutput round_robin_select(const PredictionPool& pool, const PoolState& state,
                                  std::size_t budget);

/// Dispatches on config.strategy after validate_config.
StrategyOutput select_batch(const PredictionPool& pool, const PoolState& state,
                            const SelectionConfig& config);

/// The stored image embedding, or the mean of its instance embeddings.
/// Throws std::invalid_argument if neither is available.
std::vector<double> image_embedding(const ImagePrediction& image);

struct Multipliers {
  double alpha;
  double beta;
};

/// alpha = 2.5x and beta = 1.5x the mean instance count per image of `seed_images`.
/// Throws ConfigError when the result does not satisfy alpha > beta > 1.
Multipliers derive_multipliers(const PredictionPool& pool, const IdSet& seed_images);

}  // namespace taudis
