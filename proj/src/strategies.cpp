#include "taudis/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "taudis/simgraph.hpp"

namespace taudis {

namespace {

std::size_t scaled_budget(double multiplier, int budget) {
  // The epsilon absorbs representation error such as 2.3 * 10 = 22.999...
  return static_cast<std::size_t>(std::floor(multiplier * budget + 1e-9));
}

std::size_t target_size(const PoolState& state, std::size_t budget) {
  return std::min(budget, state.unlabeled.size());
}

const ImagePrediction& unlabeled_image(const PredictionPool& pool, const std::string& id) {
  const ImagePrediction* img = pool.find(id);
  if (img == nullptr) throw std::invalid_argument("no predictions for unlabeled image '" + id + "'");
  return *img;
}

CoverSolution solve_cover(const CoverProblem& problem, std::size_t k, const SelectionConfig& config) {
  return solve_max_cover(problem, k, config.cover_algorithm, static_cast<std::size_t>(config.partitions),
                         config.seed);
}

struct ScoredImage {
  std::string id;
  double value;
};

// Highest value first, ties by id.
void sort_descending(std::vector<ScoredImage>& images) {
  std::sort(images.begin(), images.end(), [](const ScoredImage& a, const ScoredImage& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.id < b.id;
  });
}

std::vector<ScoredImage> wse_ranking(const PredictionPool& pool, const PoolState& state) {
  std::vector<ScoredImage> ranked;
  ranked.reserve(state.unlabeled.size());
  for (const auto& id : state.unlabeled) {
    ranked.push_back({id, weighted_segmentation_entropy(unlabeled_image(pool, id)).value});
  }
  sort_descending(ranked);
  return ranked;
}

void warn_if_short(const PoolState& state, std::size_t budget, SelectionDiagnostics& diag) {
  if (budget > state.unlabeled.size()) {
    diag.warnings.push_back(fmt::format("budget {} exceeds the {} unlabeled images; selecting all",
                                        budget, state.unlabeled.size()));
  }
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("image embedding dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<double> image_embedding(const ImagePrediction& image) {
  if (image.image_embedding) return *image.image_embedding;
  if (image.instances.empty()) {
    throw std::invalid_argument("image '" + image.image_id +
                                "' has no image embedding and no instances to average");
  }
  std::vector<double> mean(image.instances.front().embedding.size(), 0.0);
  for (const auto& inst : image.instances) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += inst.embedding[i];
  }
  for (double& v : mean) v /= static_cast<double>(image.instances.size());
  return mean;
}

std::vector<RankedInstance> rank_unlabeled_instances(const PredictionPool& pool,
                                                     const PoolState& state,
                                                     InstanceMetric metric) {
  std::vector<RankedInstance> ranked;
  for (const auto& id : state.unlabeled) {
    for (const auto& inst : unlabeled_image(pool, id).instances) {
      ranked.push_back({&inst, instance_uncertainty(inst, metric)});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedInstance& a, const RankedInstance& b) {
    if (more_uncertain(a.score, b.score)) return true;
    if (more_uncertain(b.score, a.score)) return false;
    return a.instance->instance_id < b.instance->instance_id;
  });
  return ranked;
}

std::vector<std::string> majority_vote(const std::vector<const InstancePrediction*>& diverse,
                                       std::size_t budget, const PredictionPool& pool,
                                       const PoolState& state, std::map<std::string, int>* votes) {
  struct Tally {
    int count = 0;
    double entropy = 0.0;
  };
  std::map<std::string, Tally> tally;
  for (const InstancePrediction* inst : diverse) {
    if (!state.unlabeled.contains(inst->image_id)) continue;
    auto& t = tally[inst->image_id];
    ++t.count;
    t.entropy += inst->seg_entropy;
  }
  if (votes != nullptr) {
    votes->clear();
    for (const auto& [id, t] : tally) (*votes)[id] = t.count;
  }

  std::vector<std::pair<std::string, Tally>> ranked(tally.begin(), tally.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    if (a.second.entropy != b.second.entropy) return a.second.entropy > b.second.entropy;
    return a.first < b.first;
  });

  const std::size_t target = target_size(state, budget);
  std::vector<std::string> chosen;
  chosen.reserve(target);
  for (const auto& [id, t] : ranked) {
    if (chosen.size() >= target) break;
    chosen.push_back(id);
  }
  if (chosen.size() < target) {
    for (const auto& img : wse_ranking(pool, state)) {
      if (chosen.size() >= target) break;
      if (!tally.contains(img.id)) chosen.push_back(img.id);
    }
  }
  return chosen;
}

InstanceCoverProblem build_instance_cover_problem(const PredictionPool& pool, const PoolState& state,
                                                  const SelectionConfig& config) {
  InstanceCoverProblem out;
  out.ranked = rank_unlabeled_instances(pool, state, config.instance_metric);
  out.k = scaled_budget(config.beta, config.budget);
  const std::size_t n_candidates = std::min(scaled_budget(config.alpha, config.budget), out.ranked.size());

  std::vector<EmbeddingRef> candidates;
  candidates.reserve(n_candidates);
  for (std::size_t i = 0; i < n_candidates; ++i) {
    candidates.push_back({out.ranked[i].instance->instance_id, out.ranked[i].instance->embedding});
  }
  std::vector<const InstancePrediction*> by_id;
  by_id.reserve(out.ranked.size());
  for (const auto& r : out.ranked) by_id.push_back(r.instance);
  std::sort(by_id.begin(), by_id.end(),
            [](const auto* a, const auto* b) { return a->instance_id < b->instance_id; });
  std::vector<EmbeddingRef> universe;
  universe.reserve(by_id.size());
  for (const auto* inst : by_id) universe.push_back({inst->instance_id, inst->embedding});

  out.problem = to_cover_problem(build_similarity_matrix(candidates, universe, config.sigma));
  return out;
}

StrategyOutput taudis_select(const PredictionPool& pool, const PoolState& state,
                             const SelectionConfig& config) {
  StrategyOutput out;
  auto& diag = out.diagnostics;
  const auto budget = static_cast<std::size_t>(config.budget);
  warn_if_short(state, budget, diag);

  const InstanceCoverProblem cover = build_instance_cover_problem(pool, state, config);
  std::vector<const InstancePrediction*> diverse;
  if (cover.problem.candidate_count() > 0) {
    const CoverSolution solution = solve_cover(cover.problem, cover.k, config);
    for (std::size_t c : solution.selected) diverse.push_back(cover.ranked[c].instance);
    diag.coverage = solution.coverage();
  }
  diag.universe_size = cover.problem.universe_size();
  diag.candidate_instances = cover.problem.candidate_count();
  diag.diverse_instances = diverse.size();
  for (const auto* inst : diverse) diag.diverse_ids.push_back(inst->instance_id);
  out.selected_images = majority_vote(diverse, budget, pool, state, &diag.votes);
  return out;
}

StrategyOutput taudis_img_select(const PredictionPool& pool, const PoolState& state,
                                 const SelectionConfig& config) {
  StrategyOutput out;
  auto& diag = out.diagnostics;
  const auto budget = static_cast<std::size_t>(config.budget);
  warn_if_short(state, budget, diag);

  const auto ranked = wse_ranking(pool, state);
  const std::size_t n_candidates = std::min(scaled_budget(config.alpha, config.budget), ranked.size());
  if (n_candidates == 0) return out;

  // The universe is every unlabeled image, in id order.
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(state.unlabeled.size());
  std::map<std::string, std::size_t> slot;
  for (const auto& id : state.unlabeled) {
    slot[id] = embeddings.size();
    embeddings.push_back(image_embedding(unlabeled_image(pool, id)));
  }
  std::vector<EmbeddingRef> universe;
  universe.reserve(embeddings.size());
  for (const auto& id : state.unlabeled) universe.push_back({id, embeddings[slot[id]]});
  std::vector<EmbeddingRef> candidates;
  candidates.reserve(n_candidates);
  for (std::size_t i = 0; i < n_candidates; ++i) {
    candidates.push_back({ranked[i].id, embeddings[slot[ranked[i].id]]});
  }

  const SimilarityMatrix matrix = build_similarity_matrix(candidates, universe, config.sigma);
  const CoverProblem problem = to_cover_problem(matrix);
  const CoverSolution solution = solve_cover(problem, budget, config);
  for (std::size_t c : solution.selected) out.selected_images.push_back(ranked[c].id);
  diag.candidate_instances = n_candidates;
  diag.diverse_instances = solution.selected.size();
  diag.coverage = solution.coverage();
  diag.universe_size = problem.universe_size();
  return out;
}

StrategyOutput random_select(const PoolState& state, std::size_t budget, std::uint64_t seed) {
  StrategyOutput out;
  warn_if_short(state, budget, out.diagnostics);
  std::vector<std::string> ids(state.unlabeled.begin(), state.unlabeled.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(target_size(state, budget));
  out.selected_images = std::move(ids);
  return out;
}

StrategyOutput uncertainty_select(const PredictionPool& pool, const PoolState& state,
                                  StrategyKind metric, std::size_t budget) {
  StrategyOutput out;
  warn_if_short(state, budget, out.diagnostics);
  std::vector<ScoredImage> ranked;
  ranked.reserve(state.unlabeled.size());
  for (const auto& id : state.unlabeled) {
    const auto& img = unlabeled_image(pool, id);
    switch (metric) {
      case StrategyKind::kWse:
        ranked.push_back({id, weighted_segmentation_entropy(img).value});
        break;
      case StrategyKind::kWce:
        ranked.push_back({id, weighted_classification_entropy(img).value});
        break;
      case StrategyKind::kAvgCm:
        // Lower margin is more uncertain.
        ranked.push_back({id, -average_classification_margin(img).value});
        break;
      default:
        throw std::invalid_argument("uncertainty_select needs avg_cm, wce or wse");
    }
  }
  sort_descending(ranked);
  const std::size_t target = target_size(state, budget);
  for (std::size_t i = 0; i < target; ++i) out.selected_images.push_back(ranked[i].id);
  return out;
}

StrategyOutput coreset_select(const PredictionPool& pool, const PoolState& state,
                              std::size_t budget) {
  StrategyOutput out;
  warn_if_short(state, budget, out.diagnostics);
  const std::size_t target = target_size(state, budget);
  if (target == 0) return out;

  std::vector<std::string> ids(state.unlabeled.begin(), state.unlabeled.end());
  std::vector<std::vector<double>> points;
  points.reserve(ids.size());
  for (const auto& id : ids) points.push_back(image_embedding(unlabeled_image(pool, id)));

  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  std::vector<double> nearest(ids.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(ids.size(), 0);
  auto absorb = [&](const std::vector<double>& center) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      nearest[u] = std::min(nearest[u], squared_distance(points[u], center));
    }
  };
  for (const auto& id : state.labeled) {
    const ImagePrediction* img = pool.find(id);
    if (img == nullptr) throw std::invalid_argument("no embedding for labeled image '" + id + "'");
    absorb(image_embedding(*img));
  }
  auto take = [&](std::size_t u) {
    taken[u] = 1;
    out.selected_images.push_back(ids[u]);
    absorb(points[u]);
  };
  if (state.labeled.empty()) take(0);  // ids are sorted, so this is the minimum id
  while (out.selected_images.size() < target) {
    std::size_t best = ids.size();
    for (std::size_t u = 0; u < ids.size(); ++u) {
      if (!taken[u] && (best == ids.size() || nearest[u] > nearest[best])) best = u;
    }
    take(best);
  }
  return out;
}

StrategyOutput round_robin_select(const PredictionPool& pool, const PoolState& state,
                                  std::size_t budget) {
  StrategyOutput out;
  warn_if_short(state, budget, out.diagnostics);
  const std::size_t target = target_size(state, budget);
  const std::size_t num_classes = pool.num_classes();

  std::vector<std::vector<ScoredImage>> per_class(num_classes);
  for (const auto& id : state.unlabeled) {
    const auto& img = unlabeled_image(pool, id);
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double v = class_conditional_wse(img, k, num_classes).value;
      if (v > 0.0) per_class[k].push_back({id, v});
    }
  }
  for (auto& ranking : per_class) sort_descending(ranking);

  IdSet chosen;
  std::vector<std::size_t> cursor(num_classes, 0);
  while (out.selected_images.size() < target) {
    bool progressed = false;
    for (std::size_t k = 0; k < num_classes && out.selected_images.size() < target; ++k) {
      auto& pos = cursor[k];
      while (pos < per_class[k].size() && chosen.contains(per_class[k][pos].id)) ++pos;
      if (pos == per_class[k].size()) continue;
      chosen.insert(per_class[k][pos].id);
      out.selected_images.push_back(per_class[k][pos].id);
      progressed = true;
    }
    if (!progressed) break;
  }
  if (out.selected_images.size() < target) {
    for (const auto& img : wse_ranking(pool, state)) {
      if (out.selected_images.size() >= target) break;
      if (chosen.insert(img.id).second) out.selected_images.push_back(img.id);
    }
  }
  return out;
}

StrategyOutput select_batch(const PredictionPool& pool, const PoolState& state,
                            const SelectionConfig& config) {
  validate_config(config);
  const auto budget = static_cast<std::size_t>(config.budget);
  switch (config.strategy) {
    case StrategyKind::kTaudis:
      return taudis_select(pool, state, config);
    case StrategyKind::kTaudisImg:
      return taudis_img_select(pool, state, config);
    case StrategyKind::kRandom:
      return random_select(state, budget, config.seed);
    case StrategyKind::kAvgCm:
    case StrategyKind::kWce:
    case StrategyKind::kWse:
      return uncertainty_select(pool, state, config.strategy, budget);
    case StrategyKind::kCoreset:
      return coreset_select(pool, state, budget);
    case StrategyKind::kRoundRobin:
      return round_robin_select(pool, state, budget);
  }
  throw std::logic_error("unhandled strategy");
}

Multipliers derive_multipliers(const PredictionPool& pool, const IdSet& seed_images) {
  std::size_t images = 0;
  std::size_t instances = 0;
  for (const auto& id : seed_images) {
    if (const auto* img = pool.find(id)) {
      ++images;
      instances += img->instances.size();
    }
  }
  if (images == 0) throw ConfigError("no seed images with predictions to derive alpha and beta from");
  const double mean = static_cast<double>(instances) / static_cast<double>(images);
  const Multipliers m{2.5 * mean, 1.5 * mean};
  if (!(m.beta > 1.0)) {
    throw ConfigError(fmt::format(
        "seed set averages {} instances per image; derived beta {} violates alpha > beta > 1", mean,
        m.beta));
  }
  return m;
}

}  // namespace taudis
