#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "taudis/io.hpp"
#include "taudis/simharness.hpp"

using namespace taudis;

namespace {

const std::string kData = TAUDIS_TEST_DATA;

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("score table on the two-image fixture") {
  std::ostringstream out, err;
  ScoreOptions o;
  o.input = kData + "/two_images.jsonl";
  REQUIRE(run_score(o, out, err) == kExitOk);
  const auto rows = csv_rows(out.str());
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"level", "image_id", "instance_id", "cm", "ce", "se", "avg_cm", "wce", "wse"});
  const double ln2 = std::log(2.0);
  const double ce_a = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  // image a
  CHECK(rows[1][0] == "image");
  CHECK(std::stod(rows[1][6]) == doctest::Approx(0.5));
  CHECK(std::stod(rows[1][7]) == doctest::Approx(0.5 * ce_a).epsilon(1e-12));
  CHECK(std::stod(rows[1][8]) == doctest::Approx(0.5 * ln2 / 2).epsilon(1e-12));
  // instance a0
  CHECK(rows[2][2] == "a0");
  CHECK(std::stod(rows[2][3]) == doctest::Approx(0.5));
  CHECK(std::stod(rows[2][4]) == doctest::Approx(ce_a).epsilon(1e-12));
  CHECK(std::stod(rows[2][5]) == doctest::Approx(ln2 / 2).epsilon(1e-12));
  // image b and b0
  CHECK(std::stod(rows[3][6]) == doctest::Approx(0.0));
  CHECK(std::stod(rows[3][7]) == doctest::Approx(0.2 * ln2).epsilon(1e-12));
  CHECK(std::stod(rows[3][8]) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(std::stod(rows[4][5]) == doctest::Approx(0.2));

  std::ostringstream only;
  o.metrics = {"wse"};
  REQUIRE(run_score(o, only, err) == kExitOk);
  CHECK(csv_rows(only.str())[0] == std::vector<std::string>{"level", "image_id", "instance_id", "wse"});
  o.metrics = {"bogus"};
  CHECK(run_score(o, only, err) == kExitConfigError);
}

TEST_CASE("score edge cases") {
  std::ostringstream out, err;
  ScoreOptions o;
  o.input = kData + "/empty.jsonl";
  CHECK(run_score(o, out, err) == kExitOk);
  CHECK(out.str() == "level,image_id,instance_id,cm,ce,se,avg_cm,wce,wse\n");

  std::ostringstream out2, err2;
  o.input = kData + "/corrupt_line7.jsonl";
  CHECK(run_score(o, out2, err2) == kExitParseError);
  CHECK(err2.str().find("line 7") != std::string::npos);
}

TEST_CASE("validate report") {
  std::ostringstream out, err;
  CHECK(run_validate(kData + "/two_images.jsonl", out, err) == kExitOk);
  CHECK(out.str().find("0 violations") != std::string::npos);

  std::ostringstream bad;
  CHECK(run_validate(kData + "/bad_sum.jsonl", bad, err) == kExitViolations);
  CHECK(bad.str().find("1 violations") != std::string::npos);
  CHECK(bad.str().find("x_bad") != std::string::npos);

  std::ostringstream dup;
  CHECK(run_validate(kData + "/dup_instance.jsonl", dup, err) == kExitViolations);
  CHECK(dup.str().find("1 violations") != std::string::npos);
}

TEST_CASE("config JSON") {
  SelectionConfig c;
  c.strategy = StrategyKind::kCoreset;
  c.budget = 7;
  c.alpha = 4;
  c.seed = 9;
  const auto doc = config_to_json(c);
  const SelectionConfig back = config_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(config_to_json(back) == doc);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 64);
  c.seed = 10;
  CHECK(config_hash(back) != config_hash(c));

  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"budgett": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"budget": "3"})")), ConfigError);
  CHECK_NOTHROW(config_from_json(nlohmann::json::parse(R"({"gamma": 0.5})")));

  const auto sim = simulation_options_from_json(nlohmann::json::parse(R"({"budget": 3, "gamma": 0.25})"));
  CHECK(sim.selection.rounds == 0);
  CHECK(sim.gamma == 0.25);
}

TEST_CASE("manifest layout") {
  SelectionManifest m;
  m.output.selected_images = {"b", "a"};
  m.output.diagnostics.votes = {{"a", 1}, {"b", 2}};
  m.duration_ms = 3.5;
  const std::string text = manifest_to_string(m);
  const auto doc = nlohmann::ordered_json::parse(text);
  CHECK(doc["selected_images"] == nlohmann::json::array({"b", "a"}));
  CHECK(doc["version"] == kToolVersion);
  CHECK(doc["config_hash"] == config_hash(m.config));
  CHECK(doc["diagnostics"]["votes"]["b"] == 2);
  // duration is the last field, on its own line
  const auto last_field = text.rfind("\"duration_ms\"");
  CHECK(last_field != std::string::npos);
  CHECK(text.find('\n', last_field) == text.rfind('\n', text.size() - 2));
}

TEST_CASE("select command applies overrides and rejects bad configs") {
  std::ostringstream out, err;
  SelectOptions o;
  o.input = kData + "/two_images.jsonl";
  o.overrides.strategy = "wse";
  o.overrides.budget = 1;
  REQUIRE(run_select(o, out, err) == kExitOk);
  const auto doc = nlohmann::json::parse(out.str());
  CHECK(doc["selected_images"] == nlohmann::json::array({"a"}));
  CHECK(doc["strategy"] == "wse");

  std::ostringstream out2, err2;
  o.config = kData + "/config_bad_order.json";
  o.overrides = {};
  CHECK(run_select(o, out2, err2) == kExitConfigError);
  CHECK(err2.str().find("alpha > beta") != std::string::npos);

  std::ostringstream out3, err3;
  o.config.clear();
  o.overrides.budget = 10;
  REQUIRE(run_select(o, out3, err3) == kExitOk);
  const auto all = nlohmann::json::parse(out3.str());
  CHECK(all["selected_images"].size() == 2);
  CHECK(all["diagnostics"]["warnings"].size() == 1);
}

TEST_CASE("cover command") {
  std::ostringstream out, err;
  CoverOptions o;
  o.problem = kData + "/abc_problem.json";
  o.k = 2;
  REQUIRE(run_cover(o, out, err) == kExitOk);
  const auto doc = nlohmann::json::parse(out.str());
  CHECK(doc["coverage"] == 7);
  CHECK(doc["selected"] == nlohmann::json::array({"C", "A"}));

  std::ostringstream out2, err2;
  o.algorithm = "brute";
  REQUIRE(run_cover(o, out2, err2) == kExitOk);
  CHECK(nlohmann::json::parse(out2.str())["coverage"] == 7);

  std::ostringstream out3, err3;
  o.algorithm = "nope";
  CHECK(run_cover(o, out3, err3) == kExitConfigError);

  std::ostringstream out4, err4;
  CoverOptions neither;
  CHECK(run_cover(neither, out4, err4) == kExitConfigError);
}

TEST_CASE("simulate command is reproducible") {
  const auto dir = std::filesystem::temp_directory_path() / "taudis_io_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "spec.json") << R"({"num_images": 60, "seed": 3})";
  std::ofstream(dir / "cfg.json") << R"({"budget": 5, "rounds": 3, "seed": 2, "gamma": 0.5, "initial_labeled_fraction": 0.1})";
  std::string runs[2];
  for (auto& r : runs) {
    SimulateOptions o;
    o.spec = dir / "spec.json";
    o.config = dir / "cfg.json";
    std::ostringstream out, err;
    REQUIRE(run_simulate(o, out, err) == kExitOk);
    r = out.str();
  }
  CHECK(runs[0] == runs[1]);
  const auto doc = nlohmann::json::parse(runs[0]);
  CHECK(doc["config"]["rounds"] == 3);
  CHECK(doc["report"]["strategies"].size() == 3);
  CHECK(doc["report"]["strategies"]["taudis"].size() == 4);

  std::ofstream(dir / "badspec.json") << R"({"num_images": 60, "mystery": 1})";
  SimulateOptions bad;
  bad.spec = dir / "badspec.json";
  std::ostringstream out, err;
  CHECK(run_simulate(bad, out, err) != kExitOk);
}
