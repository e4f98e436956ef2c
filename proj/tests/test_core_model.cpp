#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "taudis/core_model.hpp"

using namespace taudis;

namespace {

const char* kTwoImages =
    R"({"image_id": "b", "instances": [{"instance_id": "b0", "class_probs": [0.9, 0.1], "embedding": [1, 0], "size_ratio": 0.5, "mask": null, "seg_entropy": 0.3}]})"
    "\n"
    R"({"image_id": "a", "instances": [{"instance_id": "a0", "class_probs": [0.5, 0.5], "embedding": [0, 1], "size_ratio": 0.25, "mask": {"w": 2, "h": 1, "values": [0.5, 1.0]}, "seg_entropy": null}, {"instance_id": "a1", "class_probs": [0.2, 0.8], "embedding": [1, 1], "size_ratio": 1.0, "seg_entropy": 0.1}]})"
    "\n";

PredictionPool ingest(const std::string& text) {
  std::istringstream in(text);
  return ingest_predictions(in);
}

ValidationReport validate(const std::string& text) {
  std::istringstream in(text);
  return validate_predictions(in);
}

std::string line_with(const std::string& instances, const std::string& id = "x") {
  return R"({"image_id": ")" + id + R"(", "instances": [)" + instances + "]}\n";
}

}  // namespace

TEST_CASE("two-image file ingests to 2 images and 3 instances") {
  const PredictionPool pool = ingest(kTwoImages);
  CHECK(pool.size() == 2);
  CHECK(pool.instance_count() == 3);
  CHECK(pool.num_classes() == 2);
  CHECK(pool.embedding_dim() == 2);
  CHECK(pool.image_ids() == std::vector<std::string>{"a", "b"});
  const auto& a = pool.at("a");
  REQUIRE(a.instances[0].mask.has_value());
  CHECK(a.instances[0].seg_entropy == doctest::Approx(std::log(2.0) / 2).epsilon(1e-12));
  CHECK(a.instances[0].image_id == "a");
  CHECK(pool.find("zzz") == nullptr);
  CHECK_THROWS_AS(pool.at("zzz"), std::out_of_range);
}

TEST_CASE("probabilities summing to 0.8 name the instance") {
  const std::string text = line_with(
      R"({"instance_id": "bad7", "class_probs": [0.6, 0.2], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})");
  try {
    ingest(text);
    FAIL("expected an ingestion error");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("bad7") != std::string::npos);
    CHECK(e.line() == 1);
  }
}

TEST_CASE("empty file gives an empty pool") {
  const PredictionPool pool = ingest("");
  CHECK(pool.empty());
  CHECK(pool.instance_count() == 0);
  CHECK(ingest("\n\n").empty());
}

TEST_CASE("per-instance invariants are reported") {
  auto count = [](const std::string& inst) { return validate(line_with(inst)).violations.size(); };
  const std::string ok =
      R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})";
  CHECK(count(ok) == 0);
  CHECK(count(R"({"instance_id": "i", "class_probs": [1.2, -0.2], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})") >= 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [0, 0], "size_ratio": 0.5, "seg_entropy": 0.1})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.0, "seg_entropy": 0.1})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 1.5, "seg_entropy": 0.1})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.9})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "mask": {"w": 2, "h": 2, "values": [0.5]}})") == 1);
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "mask": {"w": 1, "h": 1, "values": [1.5]}})") == 1);
  // Supplied SE disagreeing with the mask.
  CHECK(count(R"({"instance_id": "i", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "mask": {"w": 1, "h": 1, "values": [0.5]}, "seg_entropy": 0.2})") == 1);
  CHECK(validate("{not json\n").violations.size() == 1);
}

TEST_CASE("pool-wide consistency") {
  const std::string inst_a =
      R"({"instance_id": "dup", "class_probs": [0.5, 0.5], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})";
  const std::string inst_k3 =
      R"({"instance_id": "k3", "class_probs": [0.5, 0.25, 0.25], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})";
  const auto dup = validate(line_with(inst_a, "p") + line_with(inst_a, "q"));
  REQUIRE(dup.violations.size() == 1);
  CHECK(dup.violations[0].instance_id == "dup");
  CHECK(dup.violations[0].line == 2);
  CHECK(validate(line_with(inst_a, "p") + line_with(inst_k3, "q")).violations.size() == 1);
  CHECK(validate(line_with(inst_a, "p") + line_with(inst_k3, "p")).violations.size() == 1);
}

TEST_CASE("all violations are collected, not just the first") {
  const std::string bad1 =
      R"({"instance_id": "u", "class_probs": [0.6, 0.2], "embedding": [1, 0], "size_ratio": 0.5, "seg_entropy": 0.1})";
  const std::string bad2 =
      R"({"instance_id": "v", "class_probs": [0.5, 0.5], "embedding": [0, 0], "size_ratio": 0.5, "seg_entropy": 0.1})";
  const auto report = validate(line_with(bad1, "p") + line_with(bad2, "q"));
  CHECK(report.violations.size() == 2);
  CHECK_FALSE(report.clean());
}

TEST_CASE("write then ingest round-trips, input order does not matter") {
  const PredictionPool pool = ingest(kTwoImages);
  std::ostringstream out;
  write_predictions(out, pool);
  CHECK(ingest(out.str()) == pool);

  std::istringstream lines(kTwoImages);
  std::string l1, l2;
  std::getline(lines, l1);
  std::getline(lines, l2);
  CHECK(ingest(l2 + "\n" + l1 + "\n") == pool);
}

TEST_CASE("gzip input is read transparently") {
  const auto dir = std::filesystem::temp_directory_path() / "taudis_core_test";
  std::filesystem::create_directories(dir);
  const auto plain = dir / "p.jsonl";
  const auto packed = dir / "p.jsonl.gz";
  std::ofstream(plain) << kTwoImages;
  gzFile gz = gzopen(packed.c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzputs(gz, kTwoImages);
  gzclose(gz);
  CHECK(ingest_prediction_file(packed) == ingest_prediction_file(plain));
  CHECK_THROWS_AS(ingest_prediction_file(dir / "missing.jsonl"), IngestError);

  std::ofstream(dir / "ids.txt") << "a\n\n b \n";
  CHECK(read_id_list(dir / "ids.txt") == IdSet{"a", "b"});
}

TEST_CASE("apply_round") {
  PoolState s;
  s.unlabeled = {"a", "b", "c"};
  const PoolState next = apply_round(s, {"b"});
  CHECK(next.labeled == IdSet{"b"});
  CHECK(next.unlabeled == IdSet{"a", "c"});
  CHECK(next.history.size() == 1);
  CHECK(next.total() == s.total());

  const PoolState same = apply_round(s, {});
  CHECK(same.labeled == s.labeled);
  CHECK(same.unlabeled == s.unlabeled);
  REQUIRE(same.history.size() == 1);
  CHECK(same.history[0].empty());

  CHECK_THROWS_AS(apply_round(s, {"z"}), std::invalid_argument);
  CHECK_THROWS_AS(apply_round(next, {"b"}), std::invalid_argument);
}

TEST_CASE("make_pool_state partitions the pool") {
  const PredictionPool pool = ingest(kTwoImages);
  const PoolState s = make_pool_state(pool, {"a"});
  CHECK(s.labeled == IdSet{"a"});
  CHECK(s.unlabeled == IdSet{"b"});
}

TEST_CASE("config validation and names") {
  SelectionConfig c;
  CHECK_NOTHROW(validate_config(c));
  c.alpha = 2.0;
  c.beta = 3.0;
  try {
    validate_config(c);
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("alpha > beta") != std::string::npos);
  }
  c = {};
  c.beta = 1.0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.sigma = 1.0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.budget = 0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  for (auto k : {StrategyKind::kTaudis, StrategyKind::kTaudisImg, StrategyKind::kRandom, StrategyKind::kAvgCm,
                 StrategyKind::kWce, StrategyKind::kWse, StrategyKind::kCoreset, StrategyKind::kRoundRobin}) {
    CHECK(parse_strategy(to_string(k)) == k);
  }
  CHECK(parse_cover_algorithm("lazy") == CoverAlgorithm::kLazy);
  CHECK(parse_instance_metric("ce") == InstanceMetric::kClassEntropy);
  CHECK_THROWS_AS(parse_strategy("nope"), ConfigError);
}
