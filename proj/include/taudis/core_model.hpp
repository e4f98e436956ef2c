#pragma once

// Domain types, prediction ingestion and pool bookkeeping.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taudis {

inline constexpr double kProbabilitySumTolerance = 1e-6;
inline constexpr double kSegEntropyTolerance = 1e-6;

/// Dense W x H grid of sigmoid probabilities for the winning class, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct InstancePrediction {
  std::string instance_id;
  std::string image_id;
  std::vector<double> class_probs;
  std::optional<Mask> mask;
  // Always populated after ingestion. Recomputed from the mask when one is present.
  double seg_entropy = 0.0;
  std::vector<double> embedding;
  double size_ratio = 0.0;

  friend bool operator==(const InstancePrediction&, const InstancePrediction&) = default;
};

struct ImagePrediction {
  std::string image_id;
  std::vector<InstancePrediction> instances;
  // Optional image-level embedding used by image-level diversity strategies.
  std::optional<std::vector<double>> image_embedding;

  friend bool operator==(const ImagePrediction&, const ImagePrediction&) = default;
};

/// Immutable collection of image predictions, ordered by image id.
class PredictionPool {
 public:
  PredictionPool() = default;
  explicit PredictionPool(std::vector<ImagePrediction> images);

  const std::vector<ImagePrediction>& images() const { return images_; }
  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  std::size_t instance_count() const;

  // 0 when the pool holds no instances.
  std::size_t num_classes() const { return num_classes_; }
  std::size_t embedding_dim() const { return embedding_dim_; }

  const ImagePrediction* find(std::string_view image_id) const;
  const ImagePrediction& at(std::string_view image_id) const;

  std::vector<std::string> image_ids() const;

  friend bool operator==(const PredictionPool& a, const PredictionPool& b) {
    return a.images_ == b.images_;
  }

 private:
  std::vector<ImagePrediction> images_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t num_classes_ = 0;
  std::size_t embedding_dim_ = 0;
};

using IdSet = std::set<std::string, std::less<>>;

struct PoolState {
  IdSet labeled;
  IdSet unlabeled;
  std::vector<std::vector<std::string>> history;

  std::size_t total() const { return labeled.size() + unlabeled.size(); }

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

/// Builds the initial state: everything in the pool not listed in `labeled` is unlabeled.
/// Labeled ids absent from the pool are kept in the labeled set.
PoolState make_pool_state(const PredictionPool& pool, const IdSet& labeled);

/// Moves `selected` from unlabeled to labeled and records the round.
/// Throws std::invalid_argument if any id is not currently unlabeled.
PoolState apply_round(const PoolState& state, const std::vector<std::string>& selected);

enum class StrategyKind { kTaudis, kTaudisImg, kRandom, kAvgCm, kWce, kWse, kCoreset, kRoundRobin };
enum class InstanceMetric { kSegEntropy, kClassEntropy, kClassMargin };
enum class CoverAlgorithm { kGreedy, kLazy, kPartitioned, kBruteForce };

std::string_view to_string(StrategyKind kind);
std::string_view to_string(InstanceMetric metric);
std::string_view to_string(CoverAlgorithm algo);
StrategyKind parse_strategy(std::string_view name);
InstanceMetric parse_instance_metric(std::string_view name);
CoverAlgorithm parse_cover_algorithm(std::string_view name);

struct SelectionConfig {
  int budget = 1;
  int rounds = 1;
  double alpha = 2.5;
  double beta = 1.5;
  double sigma = 0.8;
  StrategyKind strategy = StrategyKind::kTaudis;
  std::uint64_t seed = 0;

  // Ablation knobs for the instance-level two-step strategy.
  InstanceMetric instance_metric = InstanceMetric::kSegEntropy;
  CoverAlgorithm cover_algorithm = CoverAlgorithm::kGreedy;
  int partitions = 4;

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError when budget/rounds are not positive, alpha > beta > 1 fails,
/// or sigma lies outside (0, 1).
void validate_config(const SelectionConfig& config);

/// Ingestion failure with the 1-based line number of the offending record (0 if not line-bound).
class IngestError : public std::runtime_error {
 public:
  IngestError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Violation {
  std::size_t line = 0;
  std::string instance_id;  // empty when the violation is not instance-bound
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t images = 0;
  std::size_t instances = 0;
  bool clean() const { return violations.empty(); }
};

/// Checks every record invariant and collects all violations without throwing.
ValidationReport validate_predictions(std::istream& in);
ValidationReport validate_prediction_file(const std::filesystem::path& path);

/// Parses a JSON Lines prediction stream. Throws IngestError on the first violation.
PredictionPool ingest_predictions(std::istream& in);
/// Same as ingest_predictions; accepts plain or gzip-compressed files.
PredictionPool ingest_prediction_file(const std::filesystem::path& path);

/// Writes the pool as JSON Lines (one image per line, ordered by image id).
void write_predictions(std::ostream& out, const PredictionPool& pool);

/// Reads a newline-delimited id list; blank lines are skipped.
IdSet read_id_list(const std::filesystem::path& path);

/// Reads a whole text file, transparently decompressing gzip input.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace taudis
