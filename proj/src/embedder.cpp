#include "matk/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"
#include "matk/util.hpp"

using nlohmann::json;

namespace matk {

void EmbedderConfig::validate() const {
  if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
    throw Error("embedder config: invalid input shape " + std::to_string(height) + "x" +
                std::to_string(width) + "x" + std::to_string(channels));
  if (hidden_sizes.empty()) throw Error("embedder config: hidden_sizes must be non-empty");
  for (int h : hidden_sizes) {
    if (h <= 0) throw Error("embedder config: hidden sizes must be positive");
  }
  if (feature_dim < 2) throw Error("embedder config: feature_dim must be >= 2");
  if (num_classes < 0) throw Error("embedder config: num_classes must be >= 0");
  if (pixel_scale <= 0.0f) throw Error("embedder config: pixel_scale must be positive");
}

const char* train_loss_name(TrainLoss loss) {
  return loss == TrainLoss::kCrossEntropy ? "cross_entropy" : "triplet";
}

TrainLoss train_loss_from_name(const std::string& name) {
  if (name == "cross_entropy") return TrainLoss::kCrossEntropy;
  if (name == "triplet") return TrainLoss::kTriplet;
  throw Error("unknown training loss tag '" + name + "'");
}

namespace {

// layer dims: input -> hidden... -> feature_dim [-> num_classes]
std::vector<std::pair<int, int>> layer_dims(const EmbedderConfig& config) {
  std::vector<std::pair<int, int>> dims;
  int in = config.input_dim();
  for (int h : config.hidden_sizes) {
    dims.emplace_back(in, h);
    in = h;
  }
  dims.emplace_back(in, config.feature_dim);
  if (config.num_classes > 0) dims.emplace_back(config.feature_dim, config.num_classes);
  return dims;
}

}  // namespace

ModelParams init_model(const EmbedderConfig& config, uint64_t seed) {
  config.validate();
  ModelParams model;
  model.config = config;
  model.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0));
  for (const auto& [fan_in, fan_out] : layer_dims(config)) {
    const float sigma = std::sqrt(2.0f / static_cast<float>(fan_in));
    std::normal_distribution<float> dist(0.0f, sigma);
    Tensor w({fan_in, fan_out});
    for (int64_t i = 0; i < w.size(); ++i) w.at(i) = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Tensor({fan_out}));
  }
  return model;
}

EmbedderGraph build_embedder_graph(Graph& graph, const EmbedderConfig& config, bool with_head) {
  config.validate();
  if (with_head && config.num_classes <= 0)
    throw Error("class head requested but num_classes == 0");

  EmbedderGraph nodes;
  nodes.input = graph.input("pixels");
  NodeId x = nodes.input;
  if (config.pixel_offset != 0.0f) {
    nodes.pixel_offset = graph.input("pixel_offset");
    x = graph.sub(x, nodes.pixel_offset);
  }
  x = graph.scale(x, config.pixel_scale);

  const auto dims = layer_dims(config);
  const int n_layers = static_cast<int>(dims.size());
  const int n_feature_layers = static_cast<int>(config.hidden_sizes.size()) + 1;
  for (int l = 0; l < n_layers; ++l) {
    if (l == n_feature_layers) break;  // class head handled below
    nodes.weights.push_back(graph.input("W" + std::to_string(l)));
    nodes.biases.push_back(graph.input("b" + std::to_string(l)));
    x = graph.add(graph.matmul(x, nodes.weights.back()), nodes.biases.back());
    if (l < n_feature_layers - 1) x = graph.relu(x);
  }
  nodes.raw_features = x;
  nodes.features = graph.l2_normalize_rows(x);
  if (with_head) {
    const int l = n_feature_layers;
    nodes.weights.push_back(graph.input("W" + std::to_string(l)));
    nodes.biases.push_back(graph.input("b" + std::to_string(l)));
    nodes.logits = graph.add(graph.matmul(nodes.raw_features, nodes.weights.back()),
                             nodes.biases.back());
  }
  return nodes;
}

void bind_model(const EmbedderGraph& nodes, const ModelParams& model, Bindings* bindings) {
  if (nodes.weights.size() > model.weights.size())
    throw Error("model has fewer layers than the graph expects");
  for (size_t l = 0; l < nodes.weights.size(); ++l) {
    (*bindings)[nodes.weights[l]] = model.weights[l];
    (*bindings)[nodes.biases[l]] = model.biases[l];
  }
  if (nodes.pixel_offset >= 0)
    (*bindings)[nodes.pixel_offset] = Tensor::scalar(model.config.pixel_offset);
}

Tensor batch_pixels(const EmbedderConfig& config, std::span<const ImageRecord> images) {
  const int d = config.input_dim();
  Tensor batch({static_cast<int>(images.size()), d});
  for (size_t i = 0; i < images.size(); ++i) {
    const Tensor& px = images[i].pixels;
    if (px.rank() != 3 || px.dim(0) != config.height || px.dim(1) != config.width ||
        px.dim(2) != config.channels) {
      throw Error("image shape " + px.shape_str() + " does not match embedder input " +
                  std::to_string(config.height) + "x" + std::to_string(config.width) + "x" +
                  std::to_string(config.channels));
    }
    std::copy(px.data(), px.data() + d, batch.data() + static_cast<size_t>(i) * d);
  }
  return batch;
}

Tensor extract_features(const ModelParams& model, std::span<const ImageRecord> images) {
  if (images.empty()) throw Error("extract_features: empty batch");
  Graph graph;
  EmbedderGraph nodes = build_embedder_graph(graph, model.config, /*with_head=*/false);
  Bindings bindings;
  bind_model(nodes, model, &bindings);
  bindings[nodes.input] = batch_pixels(model.config, images);
  graph.forward(bindings);
  return graph.value(nodes.features);
}

NodeId EmbedderFeatures::build_features(Graph& graph, NodeId raw_pixels,
                                        Bindings* constants) const {
  const EmbedderConfig& config = model_->config;
  NodeId x = raw_pixels;
  if (config.pixel_offset != 0.0f) {
    NodeId off = graph.input("pixel_offset");
    (*constants)[off] = Tensor::scalar(config.pixel_offset);
    x = graph.sub(x, off);
  }
  x = graph.scale(x, config.pixel_scale);
  const int n_feature_layers = model_->feature_layer_count();
  for (int l = 0; l < n_feature_layers; ++l) {
    NodeId w = graph.input("W" + std::to_string(l));
    NodeId b = graph.input("b" + std::to_string(l));
    (*constants)[w] = model_->weights[static_cast<size_t>(l)];
    (*constants)[b] = model_->biases[static_cast<size_t>(l)];
    x = graph.add(graph.matmul(x, w), b);
    if (l < n_feature_layers - 1) x = graph.relu(x);
  }
  return graph.l2_normalize_rows(x);
}

namespace {

void apply_sgd(ModelParams* model, Graph& graph, const EmbedderGraph& nodes, NodeId loss,
               float lr) {
  std::vector<NodeId> wrt;
  for (size_t l = 0; l < nodes.weights.size(); ++l) {
    wrt.push_back(nodes.weights[l]);
    wrt.push_back(nodes.biases[l]);
  }
  auto grads = graph.grad(loss, wrt);
  for (size_t l = 0; l < nodes.weights.size(); ++l) {
    const Tensor& gw = grads.at(nodes.weights[l]);
    Tensor& w = model->weights[l];
    for (int64_t i = 0; i < w.size(); ++i) w.at(i) -= lr * gw.at(i);
    const Tensor& gb = grads.at(nodes.biases[l]);
    Tensor& b = model->biases[l];
    for (int64_t i = 0; i < b.size(); ++i) b.at(i) -= lr * gb.at(i);
  }
}

std::vector<std::vector<size_t>> batch_indices(size_t n, int batch_size, std::mt19937_64& rng) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

}  // namespace

TrainResult train_cross_entropy(const ModelParams& model, std::span<const ImageRecord> train_set,
                                const TrainHyper& hyper) {
  if (model.config.num_classes <= 0)
    throw Error("cross-entropy training requires num_classes > 0");
  if (train_set.empty()) throw Error("empty training set");
  for (const auto& rec : train_set) {
    if (rec.identity < 0 || rec.identity >= model.config.num_classes) {
      throw Error("label out of range: identity " + std::to_string(rec.identity) +
                  " with num_classes " + std::to_string(model.config.num_classes));
    }
  }
  if (hyper.batch_size <= 0) throw Error("batch_size must be positive");
  if (hyper.learning_rate < 0.0f) throw Error("learning_rate must be >= 0");

  TrainResult result;
  result.model = model;
  result.model.training_loss_tag = TrainLoss::kCrossEntropy;
  const int classes = model.config.num_classes;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(hyper.seed, 100000 + static_cast<uint64_t>(epoch)));
    double epoch_loss = 0.0;
    for (const auto& batch : batch_indices(train_set.size(), hyper.batch_size, rng)) {
      const int n = static_cast<int>(batch.size());
      Tensor onehot({n, classes});
      std::vector<ImageRecord> view;
      view.reserve(batch.size());
      for (int i = 0; i < n; ++i) {
        const ImageRecord& rec = train_set[batch[static_cast<size_t>(i)]];
        view.push_back(rec);
        onehot.at(i, rec.identity) = 1.0f;
      }

      Graph graph;
      EmbedderGraph nodes = build_embedder_graph(graph, model.config, /*with_head=*/true);
      NodeId labels = graph.input("labels");
      NodeId loss = graph.scale(graph.softmax_cross_entropy(nodes.logits, labels),
                                1.0f / static_cast<float>(n));
      Bindings bindings;
      bind_model(nodes, result.model, &bindings);
      bindings[nodes.input] = batch_pixels(model.config, view);
      bindings[labels] = std::move(onehot);
      graph.forward(bindings);
      epoch_loss += static_cast<double>(graph.value(loss).at(0)) * n;
      apply_sgd(&result.model, graph, nodes, loss, hyper.learning_rate);
    }
    result.epoch_loss.push_back(static_cast<float>(epoch_loss / train_set.size()));
  }
  return result;
}

TrainResult train_triplet(const ModelParams& model, std::span<const ImageRecord> train_set,
                          const TrainHyper& hyper) {
  if (train_set.empty()) throw Error("empty training set");
  if (hyper.pk_p < 2) throw Error("triplet training requires P >= 2 identities per batch");
  if (hyper.pk_k < 2) throw Error("triplet training requires K >= 2 images per identity");
  if (hyper.batch_size != hyper.pk_p * hyper.pk_k)
    throw Error("triplet training requires batch_size == P*K, got " +
                std::to_string(hyper.batch_size) + " != " +
                std::to_string(hyper.pk_p * hyper.pk_k));
  if (hyper.margin < 0.0f) throw Error("triplet margin must be >= 0");

  std::map<int, std::vector<size_t>> by_identity;
  for (size_t i = 0; i < train_set.size(); ++i)
    by_identity[train_set[i].identity].push_back(i);
  for (const auto& [id, members] : by_identity) {
    if (static_cast<int>(members.size()) < hyper.pk_k) {
      throw Error("identity " + std::to_string(id) + " has " +
                  std::to_string(members.size()) + " images, need at least K=" +
                  std::to_string(hyper.pk_k) + " for triplet batches");
    }
  }
  if (static_cast<int>(by_identity.size()) < hyper.pk_p) {
    throw Error("triplet training requires at least P=" + std::to_string(hyper.pk_p) +
                " identities, got " + std::to_string(by_identity.size()));
  }

  std::vector<int> identity_list;
  for (const auto& [id, _] : by_identity) identity_list.push_back(id);

  TrainResult result;
  result.model = model;
  result.model.training_loss_tag = TrainLoss::kTriplet;
  const int n = hyper.pk_p * hyper.pk_k;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(hyper.seed, 200000 + static_cast<uint64_t>(epoch)));
    std::vector<int> ids = identity_list;
    std::shuffle(ids.begin(), ids.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start + static_cast<size_t>(hyper.pk_p) <= ids.size();
         start += static_cast<size_t>(hyper.pk_p)) {
      // assemble the P*K batch
      std::vector<ImageRecord> view;
      std::vector<int> batch_ids;
      view.reserve(static_cast<size_t>(n));
      for (int p = 0; p < hyper.pk_p; ++p) {
        const int id = ids[start + static_cast<size_t>(p)];
        std::vector<size_t> members = by_identity.at(id);
        std::shuffle(members.begin(), members.end(), rng);
        for (int k = 0; k < hyper.pk_k; ++k) {
          view.push_back(train_set[members[static_cast<size_t>(k)]]);
          batch_ids.push_back(id);
        }
      }

      // mining pass: features only
      Tensor feats = extract_features(result.model, view);
      std::vector<int> hard_pos(static_cast<size_t>(n), -1);
      std::vector<int> hard_neg(static_cast<size_t>(n), -1);
      const int d = feats.dim(1);
      auto dist2 = [&](int i, int j) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c) {
          const double diff = static_cast<double>(feats.at(i, c)) - feats.at(j, c);
          acc += diff * diff;
        }
        return acc;
      };
      for (int i = 0; i < n; ++i) {
        double worst_pos = -1.0, best_neg = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dij = dist2(i, j);
          if (batch_ids[static_cast<size_t>(j)] == batch_ids[static_cast<size_t>(i)]) {
            if (dij > worst_pos) {
              worst_pos = dij;
              hard_pos[static_cast<size_t>(i)] = j;
            }
          } else if (hard_neg[static_cast<size_t>(i)] < 0 || dij < best_neg) {
            best_neg = dij;
            hard_neg[static_cast<size_t>(i)] = j;
          }
        }
      }

      // loss graph with the mined triplets
      Graph graph;
      EmbedderGraph nodes = build_embedder_graph(graph, model.config, /*with_head=*/false);
      NodeId margin = graph.input("margin");
      NodeId total = -1;
      for (int a = 0; a < n; ++a) {
        NodeId fa = graph.row(nodes.features, a);
        NodeId fp = graph.row(nodes.features, hard_pos[static_cast<size_t>(a)]);
        NodeId fn = graph.row(nodes.features, hard_neg[static_cast<size_t>(a)]);
        NodeId dpos = graph.sum(graph.square(graph.sub(fa, fp)));
        NodeId dneg = graph.sum(graph.square(graph.sub(fa, fn)));
        NodeId term = graph.relu(graph.add(graph.sub(dpos, dneg), margin));
        total = total < 0 ? term : graph.add(total, term);
      }
      NodeId loss = graph.scale(total, 1.0f / static_cast<float>(n));

      Bindings bindings;
      bind_model(nodes, result.model, &bindings);
      bindings[nodes.input] = batch_pixels(model.config, view);
      bindings[margin] = Tensor::scalar(hyper.margin);
      graph.forward(bindings);
      epoch_loss += graph.value(loss).at(0);
      ++batches;
      apply_sgd(&result.model, graph, nodes, loss, hyper.learning_rate);
    }
    result.epoch_loss.push_back(batches > 0 ? static_cast<float>(epoch_loss / batches) : 0.0f);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format: 8-byte magic "MATKCKPT", u32 little-endian header length,
// UTF-8 JSON header, then raw little-endian float32 blobs in header order.
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'M', 'A', 'T', 'K', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const ModelParams& model, const std::string& path) {
  json header;
  header["config"] = {{"height", model.config.height},
                      {"width", model.config.width},
                      {"channels", model.config.channels},
                      {"hidden_sizes", model.config.hidden_sizes},
                      {"feature_dim", model.config.feature_dim},
                      {"num_classes", model.config.num_classes},
                      {"pixel_scale", model.config.pixel_scale},
                      {"pixel_offset", model.config.pixel_offset}};
  header["training_loss_tag"] = train_loss_name(model.training_loss_tag);
  header["seed"] = model.seed;
  json shapes = json::array();
  for (size_t l = 0; l < model.weights.size(); ++l) {
    shapes.push_back(model.weights[l].shape());
    shapes.push_back(model.biases[l].shape());
  }
  header["shapes"] = shapes;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t len = static_cast<uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (size_t l = 0; l < model.weights.size(); ++l) {
    const Tensor* tensors[2] = {&model.weights[l], &model.biases[l]};
    for (const Tensor* t : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
  }
  if (!out.good()) throw Error("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in.good() || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("corrupt header: bad magic in " + path);
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in.good()) throw Error("corrupt header: missing length in " + path);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in.good()) throw Error("corrupt header: header shorter than declared in " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw Error("corrupt header: " + std::string(e.what()));
  }

  ModelParams model;
  try {
    const json& c = header.at("config");
    model.config.height = c.at("height").get<int>();
    model.config.width = c.at("width").get<int>();
    model.config.channels = c.at("channels").get<int>();
    model.config.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
    model.config.feature_dim = c.at("feature_dim").get<int>();
    model.config.num_classes = c.at("num_classes").get<int>();
    model.config.pixel_scale = c.at("pixel_scale").get<float>();
    model.config.pixel_offset = c.at("pixel_offset").get<float>();
    model.training_loss_tag = train_loss_from_name(header.at("training_loss_tag").get<std::string>());
    model.seed = header.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw Error("corrupt header: " + std::string(e.what()));
  }
  model.config.validate();

  const auto expected = layer_dims(model.config);
  const auto shapes = header.at("shapes").get<std::vector<std::vector<int>>>();
  if (shapes.size() != expected.size() * 2)
    throw Error("shape mismatch: header lists " + std::to_string(shapes.size()) +
                " tensors, config implies " + std::to_string(expected.size() * 2));
  for (size_t l = 0; l < expected.size(); ++l) {
    const std::vector<int> w_shape = {expected[l].first, expected[l].second};
    const std::vector<int> b_shape = {expected[l].second};
    if (shapes[2 * l] != w_shape || shapes[2 * l + 1] != b_shape)
      throw Error("shape mismatch: layer " + std::to_string(l) +
                  " header shapes do not match config");
  }

  for (size_t l = 0; l < expected.size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      const std::vector<int>& shape = shapes[2 * l + static_cast<size_t>(which)];
      int64_t count = 1;
      for (int d : shape) count *= d;
      std::vector<float> data(static_cast<size_t>(count));
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(count * static_cast<int64_t>(sizeof(float))));
      if (in.gcount() != static_cast<std::streamsize>(count * static_cast<int64_t>(sizeof(float))))
        throw Error("truncated blob: tensor " + std::to_string(2 * l + static_cast<size_t>(which)) +
                    " in " + path);
      Tensor t(shape, std::move(data));
      if (which == 0)
        model.weights.push_back(std::move(t));
      else
        model.biases.push_back(std::move(t));
    }
  }
  return model;
}

}  // namespace matk
