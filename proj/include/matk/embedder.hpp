#ifndef MATK_EMBEDDER_HPP_
#define MATK_EMBEDDER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matk/dataset.hpp"
#include "matk/feature_model.hpp"
#include "matk/graph.hpp"
#include "matk/tensor.hpp"

namespace matk {

// Fully connected ReLU embedder over flattened pixels. Hidden layers use
// ReLU; the feature layer is linear and features are L2-normalized at
// extraction time. Cross-entropy training adds a linear class head on the
// unnormalized feature activations.
struct EmbedderConfig {
  int height = 32;
  int width = 16;
  int channels = 3;
  std::vector<int> hidden_sizes{256, 128};
  int feature_dim = 64;
  int num_classes = 0;  // 0 when triplet-only
  float pixel_scale = 1.0f / 255.0f;
  float pixel_offset = 0.0f;  // preprocessed = (raw - offset) * scale

  int input_dim() const { return height * width * channels; }
  void validate() const;  // throws Error on invalid configs
  bool operator==(const EmbedderConfig&) const = default;
};

enum class TrainLoss { kCrossEntropy, kTriplet };

const char* train_loss_name(TrainLoss loss);
TrainLoss train_loss_from_name(const std::string& name);

struct ModelParams {
  EmbedderConfig config;
  // weights[i]/biases[i] per layer: hidden layers, then the feature layer,
  // then the class head when num_classes > 0.
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  TrainLoss training_loss_tag = TrainLoss::kCrossEntropy;
  uint64_t seed = 0;

  int feature_layer_count() const { return static_cast<int>(config.hidden_sizes.size()) + 1; }
  bool has_head() const { return config.num_classes > 0; }
  bool operator==(const ModelParams&) const = default;
};

struct TrainHyper {
  float learning_rate = 0.05f;
  int epochs = 60;
  int batch_size = 32;
  float margin = 0.3f;  // triplet only
  int pk_p = 8;         // identities per triplet batch
  int pk_k = 4;         // images per identity per triplet batch
  uint64_t seed = 0;
};

ModelParams init_model(const EmbedderConfig& config, uint64_t seed);

// Nodes of an embedder forward graph. Weights and biases are roots so the
// same structure serves training (gradients w.r.t. parameters) and attacks
// (gradients w.r.t. pixels).
struct EmbedderGraph {
  NodeId input = -1;  // raw pixels [N, input_dim]
  NodeId pixel_offset = -1;  // -1 unless config.pixel_offset != 0
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  NodeId raw_features = -1;  // pre-normalization feature activations
  NodeId features = -1;      // L2-normalized rows
  NodeId logits = -1;        // -1 unless with_head
};

EmbedderGraph build_embedder_graph(Graph& graph, const EmbedderConfig& config, bool with_head);
void bind_model(const EmbedderGraph& nodes, const ModelParams& model, Bindings* bindings);

// Flattens records into an [N, input_dim] batch of raw pixel values.
Tensor batch_pixels(const EmbedderConfig& config, std::span<const ImageRecord> images);

// L2-normalized features, one row per image. Rows of all-zero activations
// stay zero.
Tensor extract_features(const ModelParams& model, std::span<const ImageRecord> images);

struct TrainResult {
  ModelParams model;
  std::vector<float> epoch_loss;  // mean per-sample training loss per epoch
};

TrainResult train_cross_entropy(const ModelParams& model, std::span<const ImageRecord> train_set,
                                const TrainHyper& hyper);
TrainResult train_triplet(const ModelParams& model, std::span<const ImageRecord> train_set,
                          const TrainHyper& hyper);

void save_checkpoint(const ModelParams& model, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// FeatureModel adapter over ModelParams; chains gradients through the pixel
// preprocessing and the L2 normalization.
class EmbedderFeatures final : public FeatureModel {
 public:
  explicit EmbedderFeatures(const ModelParams& model) : model_(&model) {}
  std::array<int, 3> input_shape() const override {
    return {model_->config.height, model_->config.width, model_->config.channels};
  }
  NodeId build_features(Graph& graph, NodeId raw_pixels, Bindings* constants) const override;

 private:
  const ModelParams* model_;
};

}  // namespace matk

#endif  // MATK_EMBEDDER_HPP_
