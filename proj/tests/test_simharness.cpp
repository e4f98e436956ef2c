#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "taudis/simgraph.hpp"
#include "taudis/simharness.hpp"
#include "taudis/uncertainty.hpp"

using namespace taudis;

namespace {

std::vector<const InstancePrediction*> all_instances(const PredictionPool& pool) {
  std::vector<const InstancePrediction*> out;
  for (const auto& img : pool.images()) {
    for (const auto& inst : img.instances) out.push_back(&inst);
  }
  return out;
}

}  // namespace

TEST_CASE("single cluster is mutually similar") {
  SyntheticPoolSpec spec;
  spec.num_images = 10;
  spec.num_clusters = 1;
  spec.uncertain_clusters = 1;
  const auto synth = generate_pool(spec);
  const auto inst = all_instances(synth.pool);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    for (std::size_t j = i + 1; j < inst.size(); ++j) {
      CHECK(cosine_similarity(inst[i]->embedding, inst[j]->embedding) > 0.8);
    }
  }
}

TEST_CASE("separate clusters stay below the inter-cluster bound") {
  SyntheticPoolSpec spec;
  spec.num_images = 60;
  spec.num_clusters = 2;
  spec.uncertain_clusters = 1;
  spec.intra_similarity = 0.97;
  const auto synth = generate_pool(spec);
  const auto inst = all_instances(synth.pool);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    for (std::size_t j = i + 1; j < inst.size(); ++j) {
      const double s = cosine_similarity(inst[i]->embedding, inst[j]->embedding);
      if (synth.cluster_of.at(inst[i]->instance_id) != synth.cluster_of.at(inst[j]->instance_id)) {
        CHECK(s < 0.5);
      }
    }
  }
}

TEST_CASE("generated pools are deterministic and well formed") {
  SyntheticPoolSpec spec;
  spec.seed = 12;
  const auto a = generate_pool(spec);
  const auto b = generate_pool(spec);
  std::ostringstream sa, sb;
  write_predictions(sa, a.pool);
  write_predictions(sb, b.pool);
  CHECK(sa.str() == sb.str());
  CHECK(a.pool.size() == 200);

  // Re-ingesting the written pool passes every ingestion check.
  std::istringstream in(sa.str());
  CHECK(validate_predictions(in).clean());

  for (const auto* inst : all_instances(a.pool)) {
    const int c = a.cluster_of.at(inst->instance_id);
    const double se = inst->seg_entropy;
    if (c < spec.uncertain_clusters) {
      CHECK(se >= spec.high_se_min - 1e-9);
      CHECK(se <= spec.high_se_max + 1e-9);
    } else {
      CHECK(se >= spec.low_se_min - 1e-9);
      CHECK(se <= spec.low_se_max + 1e-9);
    }
  }

  spec.seed = 13;
  std::ostringstream sc;
  write_predictions(sc, generate_pool(spec).pool);
  CHECK(sc.str() != sa.str());
}

TEST_CASE("infeasible separation is rejected") {
  SyntheticPoolSpec spec;
  spec.num_clusters = 40;
  spec.embedding_dim = 32;
  CHECK_THROWS_AS(generate_pool(spec), std::invalid_argument);
  spec = {};
  spec.intra_similarity = 0.4;
  CHECK_THROWS_AS(generate_pool(spec), std::invalid_argument);
}

TEST_CASE("constant masks hit the requested entropy") {
  for (double t : {0.0, 0.05, 0.3, 0.6, std::log(2.0)}) {
    const Mask m = constant_mask_for_entropy(t, 4);
    CHECK(m.values.size() == 16);
    CHECK(segmentation_entropy(m).value == doctest::Approx(t).epsilon(1e-9));
  }
}

TEST_CASE("mock predictor") {
  SyntheticPoolSpec spec;
  spec.num_images = 40;
  const auto synth = generate_pool(spec);
  CHECK(mock_predictor(synth, {}, 0.5) == synth.pool);
  CHECK_THROWS_AS(mock_predictor(synth, {}, 1.0), std::invalid_argument);

  // Label whole cluster-0 images until five of its instances are labeled, when the
  // pool allows an exact five.
  std::map<int, int> labeled_in;
  IdSet labeled;
  for (const auto& img : synth.pool.images()) {
    int here = 0;
    for (const auto& inst : img.instances) here += synth.cluster_of.at(inst.instance_id) == 0;
    if (here == static_cast<int>(img.instances.size()) && labeled_in[0] + here <= 5) {
      labeled.insert(img.image_id);
      for (const auto& inst : img.instances) ++labeled_in[synth.cluster_of.at(inst.instance_id)];
    }
  }
  REQUIRE(labeled_in[0] > 0);
  const PredictionPool updated = mock_predictor(synth, labeled, 0.5);
  for (const auto& img : updated.images()) {
    for (const auto& inst : img.instances) {
      const double base = synth.base_entropy.at(inst.instance_id);
      const int c = labeled_in[synth.cluster_of.at(inst.instance_id)];
      CHECK(inst.seg_entropy <= base + 1e-12);
      if (!labeled.contains(img.image_id)) {
        CHECK(inst.seg_entropy == doctest::Approx(base * std::pow(0.5, c)).epsilon(1e-9));
      }
    }
  }
  if (labeled_in[0] == 5) {
    for (const auto& img : updated.images()) {
      for (const auto& inst : img.instances) {
        if (synth.cluster_of.at(inst.instance_id) == 0 && !labeled.contains(img.image_id)) {
          CHECK(inst.seg_entropy == doctest::Approx(synth.base_entropy.at(inst.instance_id) / 32).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("cluster coverage") {
  SyntheticPoolSpec spec;
  spec.num_images = 100;
  const auto synth = generate_pool(spec);
  IdSet one_per_cluster;
  std::set<int> seen;
  for (const auto& img : synth.pool.images()) {
    for (const auto& inst : img.instances) {
      if (seen.insert(synth.cluster_of.at(inst.instance_id)).second) one_per_cluster.insert(img.image_id);
    }
  }
  REQUIRE(seen.size() == 20);
  CHECK(cluster_coverage(synth, one_per_cluster) == 1.0);
  CHECK(cluster_coverage(synth, {}) == 0.0);
}

TEST_CASE("rounds and initial sets") {
  CHECK(default_rounds(100, 10) == 9);
  CHECK(default_rounds(1500, 20) == 68);
  CHECK(default_rounds(5, 10) == 1);
  SyntheticPoolSpec spec;
  spec.num_images = 50;
  const auto synth = generate_pool(spec);
  CHECK(initial_labeled_set(synth.pool, 0.2, 3).size() == 10);
  CHECK(initial_labeled_set(synth.pool, 0.2, 3) == initial_labeled_set(synth.pool, 0.2, 3));
  CHECK(initial_labeled_set(synth.pool, 0.0, 3).empty());
}

TEST_CASE("one round labeling everything covers every cluster") {
  SyntheticPoolSpec spec;
  spec.num_images = 60;
  SimulationOptions o;
  o.initial_fraction = 0.0;
  o.selection.budget = 60;
  o.selection.rounds = 1;
  const auto report = run_simulation(spec, o, {StrategyKind::kRandom});
  const auto& trace = report.per_strategy.at("random");
  REQUIRE(trace.size() == 2);
  CHECK(trace[1].cluster_coverage == 1.0);
  CHECK(trace[1].labeled == 60);
}

TEST_CASE("simulation is deterministic and shares the initial set") {
  SyntheticPoolSpec spec;
  spec.num_images = 80;
  SimulationOptions o;
  o.selection.budget = 6;
  o.selection.rounds = 4;
  o.selection.seed = 5;
  const std::vector<StrategyKind> all{StrategyKind::kTaudis, StrategyKind::kWse, StrategyKind::kRandom,
                                      StrategyKind::kCoreset, StrategyKind::kRoundRobin, StrategyKind::kTaudisImg};
  const auto a = run_simulation(spec, o, all);
  const auto b = run_simulation(spec, o, all);
  CHECK(report_to_csv(a) == report_to_csv(b));
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  CHECK(a.initial_labeled.size() == 20);
  for (const auto& [name, trace] : a.per_strategy) {
    REQUIRE(trace.size() == 5);
    CHECK(trace[0].labeled == 20);
    for (std::size_t r = 1; r < trace.size(); ++r) {
      CHECK(trace[r].selected == 6);
      CHECK(trace[r].labeled == trace[r - 1].labeled + 6);
    }
  }
  const std::string csv = report_to_csv(a);
  CHECK(csv.rfind("round,strategy,metric,value\n", 0) == 0);
}

TEST_CASE("spec JSON round trip") {
  SyntheticPoolSpec spec;
  spec.num_images = 123;
  spec.scene_purity = 0.7;
  spec.seed = 99;
  CHECK(spec_from_json(nlohmann::json::parse(spec_to_json(spec).dump())) == spec);
  CHECK_THROWS(spec_from_json(nlohmann::json::parse(R"({"num_imgs": 3})")));
}
