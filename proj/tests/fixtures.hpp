#pragma once

#include <string>
#include <utility>
#include <vector>

#include "taudis/core_model.hpp"
#include "taudis/uncertainty.hpp"

namespace fixtures {

inline taudis::InstancePrediction instance(std::string image, std::string id,
                                           std::vector<double> probs, double se,
                                           std::vector<double> emb, double size = 0.1) {
  taudis::InstancePrediction p;
  p.image_id = std::move(image);
  p.instance_id = std::move(id);
  p.class_probs = std::move(probs);
  p.seg_entropy = se;
  p.embedding = std::move(emb);
  p.size_ratio = size;
  return p;
}

inline taudis::ImagePrediction image(std::string id, std::vector<taudis::InstancePrediction> inst) {
  taudis::ImagePrediction img;
  img.image_id = std::move(id);
  for (auto& p : inst) p.image_id = img.image_id;
  img.instances = std::move(inst);
  return img;
}

inline std::vector<double> one_hot(std::size_t k, std::size_t n) {
  std::vector<double> v(n, 0.0);
  v[k] = 1.0;
  return v;
}

// Unit vector along axis `a` in `dim` dimensions.
inline std::vector<double> axis(std::size_t a, std::size_t dim) { return one_hot(a, dim); }

}  // namespace fixtures
