#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "matk/embedder.hpp"
#include "matk/metrics.hpp"

using namespace matk;
using matk::testing::random_tensor;
using matk::testing::tiny_identity_set;

namespace {

EmbedderConfig tiny_config(int num_classes = 2) {
  EmbedderConfig config;
  config.height = 6;
  config.width = 4;
  config.channels = 1;
  config.hidden_sizes = {10};
  config.feature_dim = 5;
  config.num_classes = num_classes;
  return config;
}

double train_accuracy(const ModelParams& model, std::span<const ImageRecord> set) {
  Graph graph;
  EmbedderGraph nodes = build_embedder_graph(graph, model.config, /*with_head=*/true);
  Bindings bindings;
  bind_model(nodes, model, &bindings);
  bindings[nodes.input] = batch_pixels(model.config, set);
  graph.forward(bindings);
  const Tensor& logits = graph.value(nodes.logits);
  int correct = 0;
  for (int i = 0; i < logits.dim(0); ++i) {
    int arg = 0;
    for (int j = 1; j < logits.dim(1); ++j)
      if (logits.at(i, j) > logits.at(i, arg)) arg = j;
    if (arg == set[static_cast<size_t>(i)].identity) ++correct;
  }
  return static_cast<double>(correct) / logits.dim(0);
}

}  // namespace

TEST_SUITE("embedder") {

TEST_CASE("init is deterministic and seed-sensitive") {
  EmbedderConfig config = tiny_config();
  ModelParams a = init_model(config, 42);
  ModelParams b = init_model(config, 42);
  CHECK(a == b);
  ModelParams c = init_model(config, 43);
  bool any_diff = false;
  for (size_t l = 0; l < a.weights.size() && !any_diff; ++l)
    any_diff = !(a.weights[l] == c.weights[l]);
  CHECK(any_diff);
}

TEST_CASE("invalid configs are rejected") {
  EmbedderConfig config = tiny_config();
  config.hidden_sizes = {};
  CHECK_THROWS_AS(init_model(config, 1), Error);
  config = tiny_config();
  config.feature_dim = 1;
  CHECK_THROWS_AS(init_model(config, 1), Error);
  config = tiny_config();
  config.height = 0;
  CHECK_THROWS_AS(init_model(config, 1), Error);
}

TEST_CASE("extracted feature rows are unit norm") {
  EmbedderConfig config = tiny_config();
  ModelParams model = init_model(config, 7);
  auto images = tiny_identity_set(3, 4, 6, 4, 1, 11);
  Tensor feats = extract_features(model, images);
  REQUIRE(feats.dim(0) == static_cast<int>(images.size()));
  for (int i = 0; i < feats.dim(0); ++i) {
    double norm = 0;
    for (int j = 0; j < feats.dim(1); ++j)
      norm += static_cast<double>(feats.at(i, j)) * feats.at(i, j);
    norm = std::sqrt(norm);
    CHECK((std::abs(norm - 1.0) <= 1e-5 || norm == 0.0));
  }
}

TEST_CASE("duplicate images produce identical rows") {
  EmbedderConfig config = tiny_config();
  ModelParams model = init_model(config, 7);
  auto images = tiny_identity_set(1, 1, 6, 4, 1, 13);
  std::vector<ImageRecord> batch = {images[0], images[0]};
  Tensor feats = extract_features(model, batch);
  for (int j = 0; j < feats.dim(1); ++j) CHECK(feats.at(0, j) == feats.at(1, j));
}

TEST_CASE("extract matches a manual recomposition of the layer graph") {
  EmbedderConfig config = tiny_config();
  ModelParams model = init_model(config, 19);
  auto images = tiny_identity_set(2, 2, 6, 4, 1, 17);
  Tensor feats = extract_features(model, images);

  // independent recomposition with explicit ops
  Graph g;
  NodeId x = g.input("x");
  NodeId w0 = g.input("w0"), b0 = g.input("b0");
  NodeId w1 = g.input("w1"), b1 = g.input("b1");
  NodeId h = g.relu(g.add(g.matmul(g.scale(x, 1.0f / 255.0f), w0), b0));
  g.l2_normalize_rows(g.add(g.matmul(h, w1), b1));
  Bindings bind{{x, batch_pixels(config, images)},
                {w0, model.weights[0]},
                {b0, model.biases[0]},
                {w1, model.weights[1]},
                {b1, model.biases[1]}};
  const Tensor manual = g.forward(bind);
  REQUIRE(manual.same_shape(feats));
  for (int64_t i = 0; i < manual.size(); ++i) CHECK(manual.at(i) == feats.at(i));
}

TEST_CASE("shape mismatch is rejected") {
  EmbedderConfig config = tiny_config();
  ModelParams model = init_model(config, 7);
  ImageRecord wrong;
  wrong.pixels = Tensor({3, 3, 1});
  CHECK_THROWS_WITH_AS(extract_features(model, {&wrong, 1}), doctest::Contains("shape"), Error);
}

TEST_CASE("cross-entropy training separates two identities") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 1);
  auto train = tiny_identity_set(2, 10, 6, 4, 1, 3);
  TrainHyper hyper;
  hyper.epochs = 30;
  hyper.batch_size = 5;
  hyper.learning_rate = 0.1f;
  hyper.seed = 4;
  TrainResult result = train_cross_entropy(model, train, hyper);
  CHECK(train_accuracy(result.model, train) >= 0.95);
  REQUIRE(result.epoch_loss.size() == 30);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
}

TEST_CASE("zero learning rate and zero epochs leave params unchanged") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 1);
  auto train = tiny_identity_set(2, 4, 6, 4, 1, 5);
  TrainHyper hyper;
  hyper.epochs = 3;
  hyper.batch_size = 4;
  hyper.learning_rate = 0.0f;
  TrainResult zero_lr = train_cross_entropy(model, train, hyper);
  CHECK(zero_lr.model.weights == model.weights);
  CHECK(zero_lr.model.biases == model.biases);

  hyper.learning_rate = 0.1f;
  hyper.epochs = 0;
  TrainResult zero_epochs = train_cross_entropy(model, train, hyper);
  CHECK(zero_epochs.model.weights == model.weights);
  CHECK(zero_epochs.epoch_loss.empty());
}

TEST_CASE("out-of-range labels are rejected") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 1);
  auto train = tiny_identity_set(3, 2, 6, 4, 1, 5);  // identity 2 out of range
  TrainHyper hyper;
  CHECK_THROWS_WITH_AS(train_cross_entropy(model, train, hyper),
                       doctest::Contains("label out of range"), Error);
}

TEST_CASE("training is reproducible") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 2);
  auto train = tiny_identity_set(2, 6, 6, 4, 1, 6);
  TrainHyper hyper;
  hyper.epochs = 5;
  hyper.batch_size = 4;
  hyper.seed = 77;
  TrainResult a = train_cross_entropy(model, train, hyper);
  TrainResult b = train_cross_entropy(model, train, hyper);
  CHECK(a.model == b.model);

  hyper.pk_p = 2;
  hyper.pk_k = 2;
  hyper.batch_size = 4;
  TrainResult c = train_triplet(model, train, hyper);
  TrainResult d = train_triplet(model, train, hyper);
  CHECK(c.model == d.model);
}

TEST_CASE("triplet training pulls identities together") {
  EmbedderConfig config = tiny_config(0);
  ModelParams model = init_model(config, 3);
  auto train = tiny_identity_set(2, 8, 6, 4, 1, 8);
  TrainHyper hyper;
  hyper.epochs = 40;
  hyper.learning_rate = 0.1f;
  hyper.pk_p = 2;
  hyper.pk_k = 4;
  hyper.batch_size = 8;
  hyper.margin = 0.3f;
  hyper.seed = 9;
  TrainResult result = train_triplet(model, train, hyper);
  CHECK(result.epoch_loss.back() <= result.epoch_loss.front());

  Tensor feats = extract_features(result.model, train);
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (size_t i = 0; i < train.size(); ++i) {
    for (size_t j = i + 1; j < train.size(); ++j) {
      double d = 0;
      for (int c = 0; c < feats.dim(1); ++c) {
        const double diff = static_cast<double>(feats.at(static_cast<int>(i), c)) -
                            feats.at(static_cast<int>(j), c);
        d += diff * diff;
      }
      if (train[i].identity == train[j].identity) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra < inter / n_inter);
}

TEST_CASE("collapsed features with zero margin give zero triplet loss") {
  EmbedderConfig config = tiny_config(0);
  ModelParams model = init_model(config, 3);
  // zero weights collapse every feature to the zero vector
  for (auto& w : model.weights)
    for (int64_t i = 0; i < w.size(); ++i) w.at(i) = 0.0f;
  auto train = tiny_identity_set(2, 4, 6, 4, 1, 10);
  TrainHyper hyper;
  hyper.epochs = 1;
  hyper.learning_rate = 0.0f;
  hyper.margin = 0.0f;
  hyper.pk_p = 2;
  hyper.pk_k = 2;
  hyper.batch_size = 4;
  TrainResult result = train_triplet(model, train, hyper);
  CHECK(result.epoch_loss.front() == 0.0f);
}

TEST_CASE("triplet rejects identities with too few images") {
  EmbedderConfig config = tiny_config(0);
  ModelParams model = init_model(config, 3);
  auto train = tiny_identity_set(2, 4, 6, 4, 1, 11);
  train.push_back(train.front());
  train.back().identity = 9;  // identity 9 has a single image
  TrainHyper hyper;
  hyper.pk_p = 2;
  hyper.pk_k = 2;
  hyper.batch_size = 4;
  CHECK_THROWS_WITH_AS(train_triplet(model, train, hyper), doctest::Contains("9"), Error);
}

TEST_CASE("training loss gradients match finite differences") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 21);
  auto batch = tiny_identity_set(2, 3, 6, 4, 1, 12);

  SUBCASE("cross entropy") {
    Graph graph;
    EmbedderGraph nodes = build_embedder_graph(graph, config, /*with_head=*/true);
    NodeId labels = graph.input("labels");
    graph.scale(graph.softmax_cross_entropy(nodes.logits, labels),
                1.0f / static_cast<float>(batch.size()));
    Tensor onehot({static_cast<int>(batch.size()), 2});
    for (size_t i = 0; i < batch.size(); ++i) onehot.at(static_cast<int>(i), batch[i].identity) = 1.0f;
    Bindings bind;
    bind_model(nodes, model, &bind);
    bind[nodes.input] = batch_pixels(config, batch);
    bind[labels] = onehot;
    CHECK(fd_check(graph, bind, nodes.weights[1], 1e-3) <= 1e-3);
    CHECK(fd_check(graph, bind, nodes.biases[0], 1e-3) <= 1e-3);
  }

  SUBCASE("triplet hinge") {
    Graph graph;
    EmbedderGraph nodes = build_embedder_graph(graph, config, /*with_head=*/false);
    NodeId margin = graph.input("margin");
    NodeId fa = graph.row(nodes.features, 0);
    NodeId fp = graph.row(nodes.features, 1);
    NodeId fn = graph.row(nodes.features, 3);
    NodeId dpos = graph.sum(graph.square(graph.sub(fa, fp)));
    NodeId dneg = graph.sum(graph.square(graph.sub(fa, fn)));
    graph.relu(graph.add(graph.sub(dpos, dneg), margin));
    Bindings bind;
    bind_model(nodes, model, &bind);
    bind[nodes.input] = batch_pixels(config, batch);
    bind[margin] = Tensor::scalar(0.3f);
    CHECK(fd_check(graph, bind, nodes.weights[0], 1e-3) <= 1e-3);
  }
}

TEST_CASE("checkpoint roundtrip is bit-identical") {
  EmbedderConfig config = tiny_config(4);
  ModelParams model = init_model(config, 33);
  model.training_loss_tag = TrainLoss::kTriplet;
  const std::string path = "matk_test_ckpt.bin";
  save_checkpoint(model, path);
  ModelParams loaded = load_checkpoint(path);
  CHECK(loaded == model);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint errors are distinct") {
  EmbedderConfig config = tiny_config(2);
  ModelParams model = init_model(config, 5);
  const std::string path = "matk_test_ckpt2.bin";
  save_checkpoint(model, path);

  SUBCASE("truncated blob") {
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 40);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated blob"), Error);
  }
  SUBCASE("corrupt magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("BOGUS!!!", 8);
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("corrupt header"), Error);
  }
  SUBCASE("header/blob shape mismatch") {
    // rewrite the header with an edited feature_dim, keeping the blobs
    std::ifstream in(path, std::ios::binary);
    std::vector<char> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    uint32_t len;
    std::memcpy(&len, all.data() + 8, 4);
    std::string header(all.data() + 12, all.data() + 12 + len);
    const std::string needle = "\"feature_dim\":5";
    auto pos = header.find(needle);
    REQUIRE(pos != std::string::npos);
    header.replace(pos, needle.size(), "\"feature_dim\":6");
    std::ofstream out(path, std::ios::binary);
    out.write(all.data(), 8);
    const uint32_t new_len = static_cast<uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&new_len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(all.data() + 12 + len, static_cast<std::streamsize>(all.size() - 12 - len));
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("shape mismatch"), Error);
  }
  std::remove(path.c_str());
}

}  // TEST_SUITE
