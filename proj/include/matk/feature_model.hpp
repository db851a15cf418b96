#ifndef MATK_FEATURE_MODEL_HPP_
#define MATK_FEATURE_MODEL_HPP_

#include <array>

#include "matk/graph.hpp"

namespace matk {

// Anything that can append a differentiable pixels -> features mapping to a
// graph. Attack losses are built against this interface so tests can supply
// closed-form models.
class FeatureModel {
 public:
  virtual ~FeatureModel() = default;

  virtual std::array<int, 3> input_shape() const = 0;  // {H, W, C}

  // Appends nodes mapping `raw_pixels` (shape [N, H*W*C], values in [0,255])
  // to a feature matrix node. Constant tensors the mapping needs (weights,
  // offsets) are added to `constants` for the caller to merge into bindings.
  virtual NodeId build_features(Graph& graph, NodeId raw_pixels,
                                Bindings* constants) const = 0;
};

}  // namespace matk

#endif  // MATK_FEATURE_MODEL_HPP_
