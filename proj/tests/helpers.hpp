#ifndef MATK_TESTS_HELPERS_HPP_
#define MATK_TESTS_HELPERS_HPP_

#include <random>
#include <vector>

#include "matk/dataset.hpp"
#include "matk/feature_model.hpp"
#include "matk/metrics.hpp"
#include "matk/tensor.hpp"

namespace matk::testing {

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float lo = -0.5f,
                            float hi = 0.5f) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> dist(lo, hi);
  for (int64_t i = 0; i < t.size(); ++i) t.at(i) = dist(rng);
  return t;
}

// Identity feature map over flattened pixels; no preprocessing, no
// normalization. Lets closed-form attack examples use raw pixel distances.
class PassThroughModel final : public FeatureModel {
 public:
  PassThroughModel(int h, int w, int c) : shape_{h, w, c} {}
  std::array<int, 3> input_shape() const override { return shape_; }
  NodeId build_features(Graph& graph, NodeId raw_pixels, Bindings*) const override {
    return graph.scale(raw_pixels, 1.0f);
  }

 private:
  std::array<int, 3> shape_;
};

// Feature map that ignores its input: features = constant row vector.
class ConstantModel final : public FeatureModel {
 public:
  ConstantModel(int h, int w, int c, Tensor features)
      : shape_{h, w, c}, features_(std::move(features)) {}
  std::array<int, 3> input_shape() const override { return shape_; }
  NodeId build_features(Graph& graph, NodeId raw_pixels, Bindings* constants) const override {
    NodeId f = graph.input("const_features");
    (*constants)[f] = features_;
    // multiply pixels by zero so the input participates without influencing
    NodeId zero = graph.scale(graph.sum(raw_pixels), 0.0f);
    return graph.add(f, zero);
  }

 private:
  std::array<int, 3> shape_;
  Tensor features_;
};

inline ImageRecord pixel_image(float value, int identity = 0, int camera = 0) {
  ImageRecord rec;
  rec.pixels = Tensor({1, 1, 1}, {value});
  rec.identity = identity;
  rec.camera = camera;
  return rec;
}

// Tiny strongly-separated dataset: identity i gets a distinct base level with
// mild per-image noise. Images are h x w x c in [0, 255].
inline std::vector<ImageRecord> tiny_identity_set(int num_ids, int images_per_id, int h, int w,
                                                  int c, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 6.0f);
  std::vector<ImageRecord> out;
  for (int id = 0; id < num_ids; ++id) {
    const float base = 30.0f + 195.0f * static_cast<float>(id) / std::max(1, num_ids - 1);
    for (int k = 0; k < images_per_id; ++k) {
      ImageRecord rec;
      rec.identity = id;
      rec.camera = k % 2;
      rec.pixels = Tensor({h, w, c});
      for (int64_t i = 0; i < rec.pixels.size(); ++i) {
        const float v = base + noise(rng);
        rec.pixels.at(i) = std::round(std::min(255.0f, std::max(0.0f, v)));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// Random SPD matrix with condition number <= cond, built from Givens
// rotations of a diagonal spectrum.
inline Tensor random_spd(int dim, double cond, std::mt19937_64& rng) {
  std::vector<double> m(static_cast<size_t>(dim) * dim, 0.0);
  std::uniform_real_distribution<double> lam(1.0 / cond, 1.0);
  for (int i = 0; i < dim; ++i) m[static_cast<size_t>(i) * dim + i] = lam(rng);
  m[0] = 1.0;             // pin the extremes so cond is respected
  m[static_cast<size_t>(dim) * dim - 1] = 1.0 / cond;
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  std::uniform_int_distribution<int> pick(0, dim - 1);
  for (int r = 0; r < dim * dim; ++r) {
    int p = pick(rng), q = pick(rng);
    if (p == q) continue;
    const double th = angle(rng), cs = std::cos(th), sn = std::sin(th);
    // m <- G^T m G with Givens rotation in plane (p, q)
    for (int k = 0; k < dim; ++k) {
      const double a = m[static_cast<size_t>(k) * dim + p], b = m[static_cast<size_t>(k) * dim + q];
      m[static_cast<size_t>(k) * dim + p] = cs * a - sn * b;
      m[static_cast<size_t>(k) * dim + q] = sn * a + cs * b;
    }
    for (int k = 0; k < dim; ++k) {
      const double a = m[static_cast<size_t>(p) * dim + k], b = m[static_cast<size_t>(q) * dim + k];
      m[static_cast<size_t>(p) * dim + k] = cs * a - sn * b;
      m[static_cast<size_t>(q) * dim + k] = sn * a + cs * b;
    }
  }
  Tensor out({dim, dim});
  // exact symmetry against accumulated rounding
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      out.at(i, j) = static_cast<float>(0.5 * (m[static_cast<size_t>(i) * dim + j] +
                                               m[static_cast<size_t>(j) * dim + i]));
  return out;
}

}  // namespace matk::testing

#endif  // MATK_TESTS_HELPERS_HPP_
