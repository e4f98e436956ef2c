#include "taudis/core_model.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "taudis/uncertainty.hpp"

namespace taudis {

using nlohmann::json;

PredictionPool::PredictionPool(std::vector<ImagePrediction> images) : images_(std::move(images)) {
  std::sort(images_.begin(), images_.end(),
            [](const ImagePrediction& a, const ImagePrediction& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!index_.emplace(images_[i].image_id, i).second) {
      throw std::invalid_argument("duplicate image id '" + images_[i].image_id + "'");
    }
    for (const auto& inst : images_[i].instances) {
      if (num_classes_ == 0) {
        num_classes_ = inst.class_probs.size();
        embedding_dim_ = inst.embedding.size();
      }
    }
  }
}

std::size_t PredictionPool::instance_count() const {
  std::size_t n = 0;
  for (const auto& img : images_) n += img.instances.size();
  return n;
}

const ImagePrediction* PredictionPool::find(std::string_view image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &images_[it->second];
}

const ImagePrediction& PredictionPool::at(std::string_view image_id) const {
  const ImagePrediction* img = find(image_id);
  if (img == nullptr) throw std::out_of_range("unknown image id '" + std::string(image_id) + "'");
  return *img;
}

std::vector<std::string> PredictionPool::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(images_.size());
  for (const auto& img : images_) ids.push_back(img.image_id);
  return ids;
}

PoolState make_pool_state(const PredictionPool& pool, const IdSet& labeled) {
  PoolState state;
  state.labeled = labeled;
  for (const auto& img : pool.images()) {
    if (!labeled.contains(img.image_id)) state.unlabeled.insert(img.image_id);
  }
  return state;
}

PoolState apply_round(const PoolState& state, const std::vector<std::string>& selected) {
  PoolState next = state;
  for (const auto& id : selected) {
    auto it = next.unlabeled.find(id);
    if (it == next.unlabeled.end()) {
      throw std::invalid_argument("selected image '" + id + "' is not in the unlabeled set");
    }
    next.unlabeled.erase(it);
    next.labeled.insert(id);
  }
  next.history.push_back(selected);
  return next;
}

namespace {

constexpr std::pair<StrategyKind, std::string_view> kStrategyNames[] = {
    {StrategyKind::kTaudis, "taudis"},   {StrategyKind::kTaudisImg, "taudis_img"},
    {StrategyKind::kRandom, "random"},   {StrategyKind::kAvgCm, "avg_cm"},
    {StrategyKind::kWce, "wce"},         {StrategyKind::kWse, "wse"},
    {StrategyKind::kCoreset, "coreset"}, {StrategyKind::kRoundRobin, "round_robin"},
};

constexpr std::pair<InstanceMetric, std::string_view> kMetricNames[] = {
    {InstanceMetric::kSegEntropy, "se"},
    {InstanceMetric::kClassEntropy, "ce"},
    {InstanceMetric::kClassMargin, "cm"},
};

constexpr std::pair<CoverAlgorithm, std::string_view> kAlgoNames[] = {
    {CoverAlgorithm::kGreedy, "greedy"},
    {CoverAlgorithm::kLazy, "lazy"},
    {CoverAlgorithm::kPartitioned, "partitioned"},
    {CoverAlgorithm::kBruteForce, "brute"},
};

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
E value_of(const std::pair<E, std::string_view> (&table)[N], std::string_view name,
           std::string_view what) {
  for (const auto& [e, n] : table) {
    if (n == name) return e;
  }
  throw ConfigError(fmt::format("unknown {} '{}'", what, name));
}

}  // namespace

std::string_view to_string(StrategyKind kind) { return name_of(kStrategyNames, kind); }
std::string_view to_string(InstanceMetric metric) { return name_of(kMetricNames, metric); }
std::string_view to_string(CoverAlgorithm algo) { return name_of(kAlgoNames, algo); }
StrategyKind parse_strategy(std::string_view name) {
  return value_of(kStrategyNames, name, "strategy");
}
InstanceMetric parse_instance_metric(std::string_view name) {
  return value_of(kMetricNames, name, "instance metric");
}
CoverAlgorithm parse_cover_algorithm(std::string_view name) {
  return value_of(kAlgoNames, name, "cover algorithm");
}

void validate_config(const SelectionConfig& config) {
  if (config.budget < 1) throw ConfigError("budget must be a positive integer");
  if (config.rounds < 1) throw ConfigError("rounds must be a positive integer");
  if (!(config.alpha > config.beta)) {
    throw ConfigError(fmt::format("alpha ({}) must exceed beta ({}): alpha > beta > 1 is required",
                                  config.alpha, config.beta));
  }
  if (!(config.beta > 1.0)) {
    throw ConfigError(fmt::format("beta ({}) must exceed 1: alpha > beta > 1 is required", config.beta));
  }
  if (!(config.sigma > 0.0 && config.sigma < 1.0)) {
    throw ConfigError(fmt::format("sigma ({}) must lie in (0, 1)", config.sigma));
  }
  if (config.cover_algorithm == CoverAlgorithm::kPartitioned && config.partitions < 2) {
    throw ConfigError("partitions must be at least 2");
  }
}

IngestError::IngestError(std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, message) : message), line_(line) {}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct ParsedLine {
  std::size_t line = 0;
  std::optional<ImagePrediction> image;
  std::vector<Violation> violations;
};

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Reads an array of numbers; returns false if the node is not one.
bool read_numbers(const json& node, std::vector<double>& out) {
  if (!node.is_array()) return false;
  out.clear();
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number()) return false;
    out.push_back(v.get<double>());
  }
  return true;
}

bool present(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && !it->is_null();
}

double squared_norm(const std::vector<double>& v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

void parse_instance(const json& node, const std::string& image_id, ParsedLine& out,
                    ImagePrediction& image) {
  auto fail = [&](const std::string& inst_id, std::string msg) {
    out.violations.push_back({out.line, inst_id, std::move(msg)});
  };
  if (!node.is_object()) {
    fail("", "instance is not a JSON object");
    return;
  }
  InstancePrediction inst;
  inst.image_id = image_id;
  auto id_it = node.find("instance_id");
  if (id_it == node.end() || !id_it->is_string()) {
    fail("", "instance_id missing or not a string");
    return;
  }
  inst.instance_id = id_it->get<std::string>();
  const std::string& iid = inst.instance_id;
  bool ok = true;

  if (!node.contains("class_probs") || !read_numbers(node["class_probs"], inst.class_probs) ||
      inst.class_probs.empty()) {
    fail(iid, "class_probs missing or not a non-empty numeric array");
    ok = false;
  } else if (!all_finite(inst.class_probs)) {
    fail(iid, "class_probs contains a non-finite value");
    ok = false;
  } else {
    double sum = 0.0;
    bool negative = false;
    for (double p : inst.class_probs) {
      negative |= p < 0.0;
      sum += p;
    }
    if (negative) {
      fail(iid, "class_probs contains a negative entry");
      ok = false;
    } else if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      fail(iid, fmt::format("class_probs sum to {} (tolerance {})", sum, kProbabilitySumTolerance));
      ok = false;
    }
  }

  if (!node.contains("embedding") || !read_numbers(node["embedding"], inst.embedding) ||
      inst.embedding.empty()) {
    fail(iid, "embedding missing or not a non-empty numeric array");
    ok = false;
  } else if (!all_finite(inst.embedding)) {
    fail(iid, "embedding contains a non-finite value");
    ok = false;
  } else if (squared_norm(inst.embedding) == 0.0) {
    fail(iid, "embedding has zero norm");
    ok = false;
  }

  auto sr = node.find("size_ratio");
  if (sr == node.end() || !sr->is_number()) {
    fail(iid, "size_ratio missing or not a number");
    ok = false;
  } else {
    inst.size_ratio = sr->get<double>();
    if (!(inst.size_ratio > 0.0 && inst.size_ratio <= 1.0)) {
      fail(iid, fmt::format("size_ratio {} outside (0, 1]", inst.size_ratio));
      ok = false;
    }
  }

  const bool has_mask = present(node, "mask");
  const bool has_se = present(node, "seg_entropy");
  if (!has_mask && !has_se) {
    fail(iid, "neither mask nor seg_entropy is present");
    ok = false;
  }
  if (has_mask) {
    const json& m = node["mask"];
    Mask mask;
    if (!m.is_object() || !m.contains("w") || !m.contains("h") || !m["w"].is_number_integer() ||
        !m["h"].is_number_integer() || !m.contains("values") ||
        !read_numbers(m["values"], mask.values)) {
      fail(iid, "mask must be {\"w\": int, \"h\": int, \"values\": [f...]}");
      ok = false;
    } else {
      mask.width = m["w"].get<int>();
      mask.height = m["h"].get<int>();
      if (mask.width < 1 || mask.height < 1 ||
          mask.values.size() != static_cast<std::size_t>(mask.width) * mask.height) {
        fail(iid, fmt::format("mask is {}x{} but holds {} values", mask.width, mask.height,
                              mask.values.size()));
        ok = false;
      } else if (!std::all_of(mask.values.begin(), mask.values.end(),
                              [](double v) { return v >= 0.0 && v <= 1.0; })) {
        fail(iid, "mask values must lie in [0, 1]");
        ok = false;
      } else {
        inst.seg_entropy = segmentation_entropy(mask).value;
        inst.mask = std::move(mask);
      }
    }
  }
  if (has_se) {
    const json& se = node["seg_entropy"];
    if (!se.is_number() || !std::isfinite(se.get<double>())) {
      fail(iid, "seg_entropy is not a finite number");
      ok = false;
    } else {
      const double value = se.get<double>();
      if (value < 0.0 || value > std::log(2.0) + kSegEntropyTolerance) {
        fail(iid, fmt::format("seg_entropy {} outside [0, ln 2]", value));
        ok = false;
      } else if (inst.mask) {
        if (std::abs(value - inst.seg_entropy) > kSegEntropyTolerance) {
          fail(iid, fmt::format("seg_entropy {} disagrees with the mask ({})", value,
                                inst.seg_entropy));
          ok = false;
        }
      } else if (!has_mask) {
        inst.seg_entropy = value;
      }
    }
  }
  if (ok) image.instances.push_back(std::move(inst));
}

ParsedLine parse_line(std::string_view text, std::size_t line_no) {
  ParsedLine out;
  out.line = line_no;
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) {
    out.violations.push_back({line_no, "", "malformed record: not valid JSON"});
    return out;
  }
  if (!doc.is_object()) {
    out.violations.push_back({line_no, "", "malformed record: expected a JSON object"});
    return out;
  }
  auto id_it = doc.find("image_id");
  if (id_it == doc.end() || !id_it->is_string()) {
    out.violations.push_back({line_no, "", "malformed record: image_id missing or not a string"});
    return out;
  }
  auto inst_it = doc.find("instances");
  if (inst_it == doc.end() || !inst_it->is_array()) {
    out.violations.push_back({line_no, "", "malformed record: instances missing or not an array"});
    return out;
  }
  ImagePrediction image;
  image.image_id = id_it->get<std::string>();
  if (present(doc, "image_embedding")) {
    std::vector<double> emb;
    if (!read_numbers(doc["image_embedding"], emb) || emb.empty() || !all_finite(emb)) {
      out.violations.push_back({line_no, "", "image_embedding is not a finite numeric array"});
    } else if (squared_norm(emb) == 0.0) {
      out.violations.push_back({line_no, "", "image_embedding has zero norm"});
    } else {
      image.image_embedding = std::move(emb);
    }
  }
  for (const auto& node : *inst_it) parse_instance(node, image.image_id, out, image);
  out.image = std::move(image);
  return out;
}

struct Scan {
  std::vector<ImagePrediction> images;
  ValidationReport report;
};

// Per-line parsing runs in parallel; pool-wide checks run in line order.
Scan scan_lines(const std::vector<std::string>& lines) {
  std::vector<ParsedLine> parsed(lines.size());
  const auto n = static_cast<std::ptrdiff_t>(lines.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::string& text = lines[static_cast<std::size_t>(i)];
    const bool blank = text.find_first_not_of(" \t\r") == std::string::npos;
    if (!blank) parsed[static_cast<std::size_t>(i)] = parse_line(text, static_cast<std::size_t>(i) + 1);
  }

  Scan scan;
  auto& violations = scan.report.violations;
  IdSet image_ids;
  IdSet instance_ids;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::size_t image_dim = 0;
  for (auto& pl : parsed) {
    violations.insert(violations.end(), pl.violations.begin(), pl.violations.end());
    if (!pl.image) continue;
    ImagePrediction& image = *pl.image;
    if (!image_ids.insert(image.image_id).second) {
      violations.push_back({pl.line, "", "duplicate image id '" + image.image_id + "'"});
      continue;
    }
    if (image.image_embedding) {
      if (image_dim == 0) image_dim = image.image_embedding->size();
      if (image.image_embedding->size() != image_dim) {
        violations.push_back({pl.line, "",
                              fmt::format("image_embedding dimension {} differs from {}",
                                          image.image_embedding->size(), image_dim)});
        image.image_embedding.reset();
      }
    }
    std::vector<InstancePrediction> kept;
    for (auto& inst : image.instances) {
      bool ok = true;
      if (!instance_ids.insert(inst.instance_id).second) {
        violations.push_back({pl.line, inst.instance_id, "duplicate instance id"});
        ok = false;
      }
      if (num_classes == 0) {
        num_classes = inst.class_probs.size();
        dim = inst.embedding.size();
      }
      if (inst.class_probs.size() != num_classes) {
        violations.push_back({pl.line, inst.instance_id,
                              fmt::format("class_probs has {} classes, pool has {}",
                                          inst.class_probs.size(), num_classes)});
        ok = false;
      }
      if (inst.embedding.size() != dim) {
        violations.push_back({pl.line, inst.instance_id,
                              fmt::format("embedding dimension {} differs from {}",
                                          inst.embedding.size(), dim)});
        ok = false;
      }
      if (ok) kept.push_back(std::move(inst));
    }
    image.instances = std::move(kept);
    scan.report.instances += image.instances.size();
    scan.images.push_back(std::move(image));
  }
  scan.report.images = scan.images.size();
  return scan;
}

std::vector<std::string> split_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

PredictionPool finish(Scan scan) {
  if (!scan.report.clean()) {
    const Violation& v = scan.report.violations.front();
    const std::string msg = v.instance_id.empty() ? v.message : "instance '" + v.instance_id + "': " + v.message;
    throw IngestError(v.line, msg);
  }
  return PredictionPool(std::move(scan.images));
}

}  // namespace

ValidationReport validate_predictions(std::istream& in) { return scan_lines(split_lines(in)).report; }

ValidationReport validate_prediction_file(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return validate_predictions(in);
}

PredictionPool ingest_predictions(std::istream& in) { return finish(scan_lines(split_lines(in))); }

PredictionPool ingest_prediction_file(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return ingest_predictions(in);
}

// ---------------------------------------------------------------------------
// Writing

void write_predictions(std::ostream& out, const PredictionPool& pool) {
  for (const auto& img : pool.images()) {
    nlohmann::ordered_json doc;
    doc["image_id"] = img.image_id;
    if (img.image_embedding) doc["image_embedding"] = *img.image_embedding;
    auto& instances = doc["instances"] = nlohmann::ordered_json::array();
    for (const auto& inst : img.instances) {
      nlohmann::ordered_json node;
      node["instance_id"] = inst.instance_id;
      node["class_probs"] = inst.class_probs;
      node["embedding"] = inst.embedding;
      node["size_ratio"] = inst.size_ratio;
      if (inst.mask) {
        node["mask"] = {{"w", inst.mask->width}, {"h", inst.mask->height}, {"values", inst.mask->values}};
      } else {
        node["mask"] = nullptr;
      }
      node["seg_entropy"] = inst.seg_entropy;
      instances.push_back(std::move(node));
    }
    out << doc.dump() << '\n';
  }
}

IdSet read_id_list(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  IdSet ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    ids.insert(line.substr(first, last - first + 1));
  }
  return ids;
}

std::string read_text_file(const std::filesystem::path& path) {
  // gzread passes uncompressed input through unchanged.
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IngestError(0, "cannot open '" + path.string() + "'");
  std::string data;
  char buffer[1 << 16];
  int n = 0;
  while ((n = gzread(file, buffer, sizeof(buffer))) > 0) data.append(buffer, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw IngestError(0, "failed to read '" + path.string() + "'");
  return data;
}

}  // namespace taudis
