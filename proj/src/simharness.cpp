#include "taudis/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "taudis/simgraph.hpp"
#include "taudis/strategies.hpp"
#include "taudis/uncertainty.hpp"

namespace taudis {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("invalid synthetic pool spec: " + message);
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= n;
}

// Orthonormal cluster centers by Gram-Schmidt over Gaussian draws.
std::vector<std::vector<double>> orthonormal_centers(int count, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> centers;
  while (static_cast<int>(centers.size()) < count) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = normal(rng);
    for (const auto& c : centers) {
      const double proj = std::inner_product(v.begin(), v.end(), c.begin(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * c[i];
    }
    const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    centers.push_back(std::move(v));
  }
  return centers;
}

std::string padded_id(const char* prefix, int index, int total) {
  const int width = std::max(1, static_cast<int>(std::to_string(std::max(total - 1, 0)).size()));
  return fmt::format("{}{:0{}}", prefix, index, width);
}

std::map<int, int> labeled_per_cluster(const SyntheticPool& synthetic, const IdSet& labeled) {
  std::map<int, int> counts;
  for (const auto& id : labeled) {
    const ImagePrediction* img = synthetic.pool.find(id);
    if (img == nullptr) continue;
    for (const auto& inst : img->instances) ++counts[synthetic.cluster_of.find(inst.instance_id)->second];
  }
  return counts;
}

}  // namespace

Mask constant_mask_for_entropy(double target, int size) {
  const double h = std::clamp(target, 0.0, std::log(2.0));
  double lo = 0.0;
  double hi = 0.5;
  if (h <= 0.0) {
    hi = 0.0;
  } else if (h >= std::log(2.0)) {
    lo = 0.5;
  } else {
    // Binary entropy is increasing on [0, 0.5].
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      (binary_entropy(mid) < h ? lo : hi) = mid;
    }
  }
  Mask mask;
  mask.width = size;
  mask.height = size;
  mask.values.assign(static_cast<std::size_t>(size) * size, h >= std::log(2.0) ? 0.5 : hi);
  return mask;
}

SyntheticPool generate_pool(const SyntheticPoolSpec& spec) {
  require(spec.num_images >= 1, "num_images must be positive");
  require(spec.min_instances >= 0 && spec.max_instances >= spec.min_instances,
          "need 0 <= min_instances <= max_instances");
  require(spec.num_clusters >= 1, "num_clusters must be positive");
  require(spec.embedding_dim >= 1, "embedding_dim must be positive");
  require(spec.num_classes >= 2, "num_classes must be at least 2");
  require(spec.uncertain_clusters >= 0 && spec.uncertain_clusters <= spec.num_clusters,
          "uncertain_clusters must lie in [0, num_clusters]");
  require(spec.scene_purity >= 0.0 && spec.scene_purity <= 1.0, "scene_purity must lie in [0, 1]");
  require(spec.mask_size >= 1, "mask_size must be positive");
  const double ln2 = std::log(2.0);
  require(0.0 <= spec.high_se_min && spec.high_se_min <= spec.high_se_max && spec.high_se_max <= ln2,
          "high SE range must lie within [0, ln 2]");
  require(0.0 <= spec.low_se_min && spec.low_se_min <= spec.low_se_max && spec.low_se_max <= ln2,
          "low SE range must lie within [0, ln 2]");
  require(spec.intra_similarity > 0.0 && spec.intra_similarity < 1.0,
          "intra_similarity must lie in (0, 1)");
  if (spec.num_clusters > spec.embedding_dim || spec.intra_similarity <= spec.max_inter_similarity) {
    throw std::invalid_argument(fmt::format(
        "infeasible separation: {} clusters with intra similarity {} above inter bound {} cannot be "
        "realised at dimension {}",
        spec.num_clusters, spec.intra_similarity, spec.max_inter_similarity, spec.embedding_dim));
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cluster_pick(0, spec.num_clusters - 1);
  std::uniform_int_distribution<int> count_pick(spec.min_instances, spec.max_instances);

  const auto centers = orthonormal_centers(spec.num_clusters, spec.embedding_dim, rng);
  // Two members at noise radius s have expected cosine 1 / (1 + s^2).
  const double spread = std::sqrt(1.0 / spec.intra_similarity - 1.0);
  const double per_dim = spread / std::sqrt(static_cast<double>(spec.embedding_dim));
  const auto k = static_cast<std::size_t>(spec.num_classes);

  SyntheticPool out;
  out.num_clusters = spec.num_clusters;
  std::vector<ImagePrediction> images;
  images.reserve(static_cast<std::size_t>(spec.num_images));
  for (int i = 0; i < spec.num_images; ++i) {
    ImagePrediction img;
    img.image_id = padded_id("img_", i, spec.num_images);
    const int scene = cluster_pick(rng);
    const int count = count_pick(rng);
    for (int j = 0; j < count; ++j) {
      InstancePrediction inst;
      inst.image_id = img.image_id;
      inst.instance_id = fmt::format("{}_{}", img.image_id, j);
      const int cluster = unit(rng) < spec.scene_purity ? scene : cluster_pick(rng);
      const bool uncertain = cluster < spec.uncertain_clusters;

      inst.embedding = centers[static_cast<std::size_t>(cluster)];
      for (double& x : inst.embedding) x += per_dim * normal(rng);
      normalize(inst.embedding);

      const double mix = uncertain ? 0.5 + 0.5 * unit(rng) : 0.3 * unit(rng);
      inst.class_probs.assign(k, mix / static_cast<double>(k));
      inst.class_probs[static_cast<std::size_t>(cluster) % k] += 1.0 - mix;

      const double target = uncertain
                                ? spec.high_se_min + (spec.high_se_max - spec.high_se_min) * unit(rng)
                                : spec.low_se_min + (spec.low_se_max - spec.low_se_min) * unit(rng);
      inst.mask = constant_mask_for_entropy(target, spec.mask_size);
      inst.seg_entropy = segmentation_entropy(*inst.mask).value;
      inst.size_ratio = 0.01 + 0.29 * unit(rng);

      out.cluster_of.emplace(inst.instance_id, cluster);
      out.base_entropy.emplace(inst.instance_id, inst.seg_entropy);
      img.instances.push_back(std::move(inst));
    }
    std::vector<double> emb;
    if (img.instances.empty()) {
      emb.resize(static_cast<std::size_t>(spec.embedding_dim));
      for (double& x : emb) x = normal(rng);
    } else {
      emb = image_embedding(img);
    }
    normalize(emb);
    img.image_embedding = std::move(emb);
    images.push_back(std::move(img));
  }
  out.pool = PredictionPool(std::move(images));
  return out;
}

PredictionPool mock_predictor(const SyntheticPool& synthetic, const IdSet& labeled, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  const auto counts = labeled_per_cluster(synthetic, labeled);
  std::vector<ImagePrediction> images = synthetic.pool.images();
  if (counts.empty()) return PredictionPool(std::move(images));
  const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& img = images[static_cast<std::size_t>(i)];
    if (labeled.contains(img.image_id)) continue;
    for (auto& inst : img.instances) {
      auto it = counts.find(synthetic.cluster_of.find(inst.instance_id)->second);
      if (it == counts.end()) continue;
      const double base = synthetic.base_entropy.find(inst.instance_id)->second;
      const int size = inst.mask ? inst.mask->width : 1;
      inst.mask = constant_mask_for_entropy(base * std::pow(gamma, it->second), size);
      inst.seg_entropy = segmentation_entropy(*inst.mask).value;
    }
  }
  return PredictionPool(std::move(images));
}

double cluster_coverage(const SyntheticPool& synthetic, const IdSet& labeled) {
  std::set<int> populated;
  for (const auto& [id, c] : synthetic.cluster_of) populated.insert(c);
  if (populated.empty()) return 0.0;
  return static_cast<double>(labeled_per_cluster(synthetic, labeled).size()) /
         static_cast<double>(populated.size());
}

int default_rounds(std::size_t unlabeled, int budget) {
  if (budget < 1) throw std::invalid_argument("budget must be positive");
  const std::size_t b = static_cast<std::size_t>(budget);
  const std::size_t needed = (9 * unlabeled + 9) / 10;  // ceil(0.9 * unlabeled)
  return std::max(1, static_cast<int>((needed + b - 1) / b));
}

IdSet initial_labeled_set(const PredictionPool& pool, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("initial labeled fraction must lie in [0, 1)");
  }
  std::vector<std::string> ids = pool.image_ids();
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  return IdSet(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
}

namespace {

double mean_pairwise_similarity(const PredictionPool& pool, const std::vector<std::string>& images) {
  std::vector<const std::vector<double>*> embeddings;
  for (const auto& id : images) {
    for (const auto& inst : pool.at(id).instances) embeddings.push_back(&inst.embedding);
  }
  if (embeddings.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      total += cosine_similarity(*embeddings[i], *embeddings[j]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double mean_unlabeled_entropy(const PredictionPool& pool, const PoolState& state) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& id : state.unlabeled) {
    for (const auto& inst : pool.at(id).instances) {
      total += inst.seg_entropy;
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::vector<RoundMetrics> simulate_strategy(const SyntheticPool& synthetic, const IdSet& initial,
                                            const SimulationOptions& options, int rounds,
                                            StrategyKind strategy) {
  std::vector<RoundMetrics> trace;
  PoolState state = make_pool_state(synthetic.pool, initial);
  PredictionPool predictions = mock_predictor(synthetic, state.labeled, options.gamma);
  trace.push_back({0, state.labeled.size(), 0, cluster_coverage(synthetic, state.labeled), 0.0,
                   mean_unlabeled_entropy(predictions, state)});

  SelectionConfig config = options.selection;
  config.strategy = strategy;
  config.rounds = rounds;
  for (int r = 1; r <= rounds; ++r) {
    config.seed = options.selection.seed + static_cast<std::uint64_t>(r);
    const StrategyOutput out = select_batch(predictions, state, config);
    state = apply_round(state, out.selected_images);
    const double redundancy = mean_pairwise_similarity(predictions, out.selected_images);
    predictions = mock_predictor(synthetic, state.labeled, options.gamma);
    trace.push_back({r, state.labeled.size(), out.selected_images.size(),
                     cluster_coverage(synthetic, state.labeled), redundancy,
                     mean_unlabeled_entropy(predictions, state)});
  }
  return trace;
}

}  // namespace

SimulationReport run_simulation(const SyntheticPoolSpec& spec, const SimulationOptions& options,
                                const std::vector<StrategyKind>& strategies) {
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  const SyntheticPool synthetic = generate_pool(spec);
  const IdSet initial = initial_labeled_set(synthetic.pool, options.initial_fraction, options.selection.seed);
  const std::size_t unlabeled = synthetic.pool.size() - initial.size();
  const int rounds = options.selection.rounds > 0 ? options.selection.rounds
                                                  : default_rounds(unlabeled, options.selection.budget);
  {
    SelectionConfig check = options.selection;
    check.rounds = rounds;
    validate_config(check);
  }

  SimulationReport report;
  report.rounds = rounds;
  report.initial_labeled.assign(initial.begin(), initial.end());
  std::vector<std::vector<RoundMetrics>> traces(strategies.size());
  const auto n = static_cast<std::ptrdiff_t>(strategies.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    traces[s] = simulate_strategy(synthetic, initial, options, rounds, strategies[s]);
  }
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    report.per_strategy[std::string(to_string(strategies[s]))] = std::move(traces[s]);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json spec_to_json(const SyntheticPoolSpec& spec) {
  return {
      {"num_images", spec.num_images},
      {"min_instances", spec.min_instances},
      {"max_instances", spec.max_instances},
      {"num_clusters", spec.num_clusters},
      {"intra_similarity", spec.intra_similarity},
      {"max_inter_similarity", spec.max_inter_similarity},
      {"scene_purity", spec.scene_purity},
      {"embedding_dim", spec.embedding_dim},
      {"num_classes", spec.num_classes},
      {"uncertain_clusters", spec.uncertain_clusters},
      {"high_se_min", spec.high_se_min},
      {"high_se_max", spec.high_se_max},
      {"low_se_min", spec.low_se_min},
      {"low_se_max", spec.low_se_max},
      {"mask_size", spec.mask_size},
      {"seed", spec.seed},
  };
}

SyntheticPoolSpec spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("synthetic pool spec must be a JSON object");
  SyntheticPoolSpec spec;
  for (const auto& [key, value] : doc.items()) {
    auto as_int = [&](int& field) {
      if (!value.is_number_integer()) throw std::invalid_argument(key + " must be an integer");
      field = value.get<int>();
    };
    auto as_double = [&](double& field) {
      if (!value.is_number()) throw std::invalid_argument(key + " must be a number");
      field = value.get<double>();
    };
    if (key == "num_images") as_int(spec.num_images);
    else if (key == "min_instances") as_int(spec.min_instances);
    else if (key == "max_instances") as_int(spec.max_instances);
    else if (key == "num_clusters") as_int(spec.num_clusters);
    else if (key == "intra_similarity") as_double(spec.intra_similarity);
    else if (key == "max_inter_similarity") as_double(spec.max_inter_similarity);
    else if (key == "scene_purity") as_double(spec.scene_purity);
    else if (key == "embedding_dim") as_int(spec.embedding_dim);
    else if (key == "num_classes") as_int(spec.num_classes);
    else if (key == "uncertain_clusters") as_int(spec.uncertain_clusters);
    else if (key == "high_se_min") as_double(spec.high_se_min);
    else if (key == "high_se_max") as_double(spec.high_se_max);
    else if (key == "low_se_min") as_double(spec.low_se_min);
    else if (key == "low_se_max") as_double(spec.low_se_max);
    else if (key == "mask_size") as_int(spec.mask_size);
    else if (key == "seed") {
      if (!value.is_number_unsigned()) throw std::invalid_argument("seed must be a non-negative integer");
      spec.seed = value.get<std::uint64_t>();
    } else {
      throw std::invalid_argument("unknown synthetic pool spec key '" + key + "'");
    }
  }
  return spec;
}

nlohmann::ordered_json report_to_json(const SimulationReport& report) {
  nlohmann::ordered_json doc;
  doc["rounds"] = report.rounds;
  doc["initial_labeled"] = report.initial_labeled.size();
  auto& strategies = doc["strategies"] = nlohmann::ordered_json::object();
  for (const auto& [name, trace] : report.per_strategy) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : trace) {
      arr.push_back({{"round", m.round},
                     {"labeled", m.labeled},
                     {"selected", m.selected},
                     {"cluster_coverage", m.cluster_coverage},
                     {"redundancy", m.redundancy},
                     {"mean_pool_uncertainty", m.mean_pool_uncertainty}});
    }
    strategies[name] = std::move(arr);
  }
  return doc;
}

std::string report_to_csv(const SimulationReport& report) {
  std::string csv = "round,strategy,metric,value\n";
  for (const auto& [name, trace] : report.per_strategy) {
    for (const auto& m : trace) {
      csv += fmt::format("{},{},labeled,{}\n", m.round, name, m.labeled);
      csv += fmt::format("{},{},selected,{}\n", m.round, name, m.selected);
      csv += fmt::format("{},{},cluster_coverage,{}\n", m.round, name, m.cluster_coverage);
      csv += fmt::format("{},{},redundancy,{}\n", m.round, name, m.redundancy);
      csv += fmt::format("{},{},mean_pool_uncertainty,{}\n", m.round, name, m.mean_pool_uncertainty);
    }
  }
  return csv;
}

}  // namespace taudis
