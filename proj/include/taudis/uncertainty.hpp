#pragma once

// Instance- and image-level uncertainty metrics. All entropies are in nats.

#include <cstddef>
#include <span>
#include <utility>

#include "taudis/core_model.hpp"

namespace taudis {

enum class Orientation { kLowerIsUncertain, kHigherIsUncertain };

struct UncertaintyScore {
  double value = 0.0;
  Orientation orientation = Orientation::kHigherIsUncertain;
};

// Mask probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kMaskClampEpsilon = 1e-12;

/// Indices of the two most probable classes; ties go to the lower index.
std::pair<std::size_t, std::size_t> top_two_classes(std::span<const double> probs);

/// Index of the most probable class; ties go to the lower index.
std::size_t winning_class(std::span<const double> probs);

/// p(c1) - p(c2). Throws std::invalid_argument when fewer than two classes.
UncertaintyScore classification_margin(std::span<const double> probs);

/// Shannon entropy with 0 log 0 = 0.
UncertaintyScore classification_entropy(std::span<const double> probs);

/// Binary entropy of a single probability.
double binary_entropy(double p);

/// Mean binary entropy over the mask pixels. Throws std::invalid_argument on an empty mask.
UncertaintyScore segmentation_entropy(std::span<const double> mask_values);
UncertaintyScore segmentation_entropy(const Mask& mask);

/// Sum of size_ratio * CE over instances; 0 for an empty image.
UncertaintyScore weighted_classification_entropy(const ImagePrediction& image);

/// Sum of size_ratio * SE over instances; 0 for an empty image.
UncertaintyScore weighted_segmentation_entropy(const ImagePrediction& image);

/// Mean classification margin; 1 for an empty image so it is never picked first.
UncertaintyScore average_classification_margin(const ImagePrediction& image);

/// WSE restricted to instances whose winning class is `class_k`.
/// Throws std::out_of_range when class_k >= num_classes.
UncertaintyScore class_conditional_wse(const ImagePrediction& image, std::size_t class_k,
                                       std::size_t num_classes);

/// Instance score under the chosen metric.
UncertaintyScore instance_uncertainty(const InstancePrediction& instance, InstanceMetric metric);

/// Strict "a is more uncertain than b" for scores of the same orientation.
inline bool more_uncertain(const UncertaintyScore& a, const UncertaintyScore& b) {
  return a.orientation == Orientation::kHigherIsUncertain ? a.value > b.value : a.value < b.value;
}

}  // namespace taudis
