#include "taudis/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taudis {

std::pair<std::size_t, std::size_t> top_two_classes(std::span<const double> probs) {
  if (probs.size() < 2) throw std::invalid_argument("need at least two classes for a margin");
  std::size_t first = 0;
  std::size_t second = 1;
  if (probs[1] > probs[0]) std::swap(first, second);
  for (std::size_t k = 2; k < probs.size(); ++k) {
    if (probs[k] > probs[first]) {
      second = first;
      first = k;
    } else if (probs[k] > probs[second]) {
      second = k;
    }
  }
  return {first, second};
}

std::size_t winning_class(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("empty probability vector");
  // max_element returns the first maximum.
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

UncertaintyScore classification_margin(std::span<const double> probs) {
  auto [c1, c2] = top_two_classes(probs);
  return {probs[c1] - probs[c2], Orientation::kLowerIsUncertain};
}

UncertaintyScore classification_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return {std::max(h, 0.0), Orientation::kHigherIsUncertain};
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  const double q = std::clamp(p, kMaskClampEpsilon, 1.0 - kMaskClampEpsilon);
  return -q * std::log(q) - (1.0 - q) * std::log1p(-q);
}

UncertaintyScore segmentation_entropy(std::span<const double> mask_values) {
  if (mask_values.empty()) throw std::invalid_argument("segmentation entropy of an empty mask");
  double sum = 0.0;
  for (double p : mask_values) sum += binary_entropy(p);
  return {sum / static_cast<double>(mask_values.size()), Orientation::kHigherIsUncertain};
}

UncertaintyScore segmentation_entropy(const Mask& mask) { return segmentation_entropy(mask.values); }

UncertaintyScore weighted_classification_entropy(const ImagePrediction& image) {
  double total = 0.0;
  for (const auto& inst : image.instances) {
    total += inst.size_ratio * classification_entropy(inst.class_probs).value;
  }
  return {total, Orientation::kHigherIsUncertain};
}

UncertaintyScore weighted_segmentation_entropy(const ImagePrediction& image) {
  double total = 0.0;
  for (const auto& inst : image.instances) total += inst.size_ratio * inst.seg_entropy;
  return {total, Orientation::kHigherIsUncertain};
}

UncertaintyScore average_classification_margin(const ImagePrediction& image) {
  if (image.instances.empty()) return {1.0, Orientation::kLowerIsUncertain};
  double total = 0.0;
  for (const auto& inst : image.instances) total += classification_margin(inst.class_probs).value;
  return {total / static_cast<double>(image.instances.size()), Orientation::kLowerIsUncertain};
}

UncertaintyScore class_conditional_wse(const ImagePrediction& image, std::size_t class_k,
                                       std::size_t num_classes) {
  if (class_k >= num_classes) throw std::out_of_range("class index out of range");
  double total = 0.0;
  for (const auto& inst : image.instances) {
    if (winning_class(inst.class_probs) == class_k) total += inst.size_ratio * inst.seg_entropy;
  }
  return {total, Orientation::kHigherIsUncertain};
}

UncertaintyScore instance_uncertainty(const InstancePrediction& instance, InstanceMetric metric) {
  switch (metric) {
    case InstanceMetric::kSegEntropy:
      return {instance.seg_entropy, Orientation::kHigherIsUncertain};
    case InstanceMetric::kClassEntropy:
      return classification_entropy(instance.class_probs);
    case InstanceMetric::kClassMargin:
      return classification_margin(instance.class_probs);
  }
  throw std::logic_error("unhandled instance metric");
}

}  // namespace taudis
