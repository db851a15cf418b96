#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "matk/graph.hpp"

using namespace matk;
using matk::testing::random_tensor;

TEST_SUITE("graph") {

TEST_CASE("matmul hand arithmetic") {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  g.matmul(a, b);
  const Tensor& out = g.forward({{a, Tensor::matrix({{1, 2}, {3, 4}})},
                                 {b, Tensor::matrix({{1}, {1}})}});
  CHECK(out.shape() == std::vector<int>{2, 1});
  CHECK(out.at(0) == 3.0f);
  CHECK(out.at(1) == 7.0f);
}

TEST_CASE("relu definition") {
  Graph g;
  NodeId x = g.input("x");
  g.relu(x);
  const Tensor& out = g.forward({{x, Tensor::vector({-1, 0, 2})}});
  CHECK(out.at(0) == 0.0f);
  CHECK(out.at(1) == 0.0f);
  CHECK(out.at(2) == 2.0f);
}

TEST_CASE("l2 normalize 3-4-5 triangle") {
  Graph g;
  NodeId x = g.input("x");
  g.l2_normalize_rows(x);
  const Tensor& out = g.forward({{x, Tensor::vector({3, 4})}});
  CHECK(out.at(0) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(out.at(1) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("l2 normalize of zero vector stays zero with zero gradient") {
  Graph g;
  NodeId x = g.input("x");
  NodeId y = g.l2_normalize_rows(x);
  NodeId out = g.sum(y);
  g.forward({{x, Tensor::vector({0, 0, 0})}});
  CHECK(g.value(y).at(0) == 0.0f);
  CHECK(g.value(y).at(1) == 0.0f);
  auto grads = g.grad(out, {x});
  for (int i = 0; i < 3; ++i) CHECK(grads.at(x).at(i) == 0.0f);
}

TEST_CASE("grad of sum of squares") {
  Graph g;
  NodeId x = g.input("x");
  NodeId out = g.sum(g.square(x));
  g.forward({{x, Tensor::vector({1, 2, 3})}});
  auto grads = g.grad(out, {x});
  CHECK(grads.at(x).at(0) == doctest::Approx(2.0));
  CHECK(grads.at(x).at(1) == doctest::Approx(4.0));
  CHECK(grads.at(x).at(2) == doctest::Approx(6.0));
}

TEST_CASE("grad of sum of normalized vector") {
  Graph g;
  NodeId x = g.input("x");
  NodeId out = g.sum(g.l2_normalize_rows(x));
  g.forward({{x, Tensor::vector({3, 4})}});
  auto grads = g.grad(out, {x});
  // d/dx_i (x_1+x_2)/r = 1/r - (x_1+x_2) x_i / r^3 at (3,4): (0.032, -0.024)
  CHECK(grads.at(x).at(0) == doctest::Approx(0.032).epsilon(1e-4));
  CHECK(grads.at(x).at(1) == doctest::Approx(-0.024).epsilon(1e-4));
  CHECK(fd_check(g, {{x, Tensor::vector({3, 4})}}, x, 1e-3) <= 1e-4);
}

TEST_CASE("relu subgradient convention") {
  Graph g;
  NodeId x = g.input("x");
  NodeId out = g.sum(g.relu(x));
  g.forward({{x, Tensor::vector({-1, 5})}});
  auto grads = g.grad(out, {x});
  CHECK(grads.at(x).at(0) == 0.0f);
  CHECK(grads.at(x).at(1) == 1.0f);

  // exactly at zero the subgradient is defined as 0
  g.forward({{x, Tensor::vector({0, 5})}});
  grads = g.grad(out, {x});
  CHECK(grads.at(x).at(0) == 0.0f);
}

TEST_CASE("fd_check on a quadratic graph") {
  Graph g;
  NodeId x = g.input("x");
  NodeId m = g.input("m");
  g.quad_form(x, m);
  Bindings b{{x, Tensor::vector({0.03125f, 0.0625f})},
             {m, Tensor::matrix({{0.25f, 0.0625f}, {0.0625f, 0.125f}})}};
  CHECK(fd_check(g, b, x, 1e-3) <= 1e-6);
}

TEST_CASE("fd_check on a two-layer relu net away from kinks") {
  std::mt19937_64 rng(7);
  Graph g;
  NodeId x = g.input("x");
  NodeId w1 = g.input("w1"), b1 = g.input("b1");
  NodeId w2 = g.input("w2"), b2 = g.input("b2");
  NodeId pre1 = g.add(g.matmul(x, w1), b1);
  NodeId h1 = g.relu(pre1);
  NodeId h2 = g.add(g.matmul(h1, w2), b2);
  g.mean(g.square(h2));

  for (int trial = 0; trial < 5; ++trial) {
    Bindings bind;
    bind[x] = random_tensor({1, 6}, rng);
    bind[w1] = random_tensor({6, 5}, rng);
    bind[b1] = random_tensor({5}, rng);
    bind[w2] = random_tensor({5, 3}, rng);
    bind[b2] = random_tensor({3}, rng);
    // keep pre-activations away from the relu kink
    g.forward(bind);
    const Tensor& pre = g.value(pre1);
    bool near_kink = false;
    for (int64_t i = 0; i < pre.size(); ++i)
      if (std::abs(pre.at(i)) < 1e-2) near_kink = true;
    if (near_kink) continue;
    CHECK(fd_check(g, bind, x, 1e-3) <= 1e-4);
    CHECK(fd_check(g, bind, w1, 1e-3) <= 1e-4);
  }
}

TEST_CASE("fd_check on a constant graph is zero") {
  Graph g;
  NodeId x = g.input("x");
  NodeId c = g.input("c");
  g.sum(g.square(c));  // independent of x
  Bindings b{{x, Tensor::vector({1, 2})}, {c, Tensor::vector({3})}};
  CHECK(fd_check(g, b, x, 1e-3) == 0.0);
}

TEST_CASE("every op matches central differences at random points") {
  std::mt19937_64 rng(123);
  const double h = 3e-3;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int kind = trial % 10;
    Graph g;
    NodeId x = g.input("x");
    Bindings bind;
    switch (kind) {
      case 0: {  // add with row broadcast
        NodeId b = g.input("b");
        g.mean(g.square(g.add(x, b)));
        bind[x] = random_tensor({3, 4}, rng);
        bind[b] = random_tensor({4}, rng);
        break;
      }
      case 1: {  // sub
        NodeId b = g.input("b");
        g.mean(g.square(g.sub(x, b)));
        bind[x] = random_tensor({2, 5}, rng);
        bind[b] = random_tensor({2, 5}, rng);
        break;
      }
      case 2: {  // scale
        g.sum(g.square(g.scale(x, 0.75f)));
        bind[x] = random_tensor({7}, rng);
        break;
      }
      case 3: {  // matmul
        NodeId w = g.input("w");
        g.mean(g.square(g.matmul(x, w)));
        bind[x] = random_tensor({3, 4}, rng);
        bind[w] = random_tensor({4, 2}, rng);
        break;
      }
      case 4: {  // relu, inputs pushed away from 0
        g.sum(g.relu(x));
        Tensor t = random_tensor({8}, rng);
        for (int64_t i = 0; i < t.size(); ++i) {
          if (std::abs(t.at(i)) < 0.011f) t.at(i) = t.at(i) < 0 ? -0.011f : 0.011f;
        }
        bind[x] = t;
        break;
      }
      case 5: {  // l2 normalize rows
        g.sum(g.l2_normalize_rows(x));
        Tensor t = random_tensor({2, 4}, rng, 0.2f, 1.0f);
        bind[x] = t;
        break;
      }
      case 6: {  // softmax cross-entropy
        NodeId onehot = g.input("onehot");
        g.softmax_cross_entropy(x, onehot);
        bind[x] = random_tensor({3, 4}, rng);
        Tensor oh({3, 4});
        std::uniform_int_distribution<int> lab(0, 3);
        for (int i = 0; i < 3; ++i) oh.at(i, lab(rng)) = 1.0f;
        bind[onehot] = oh;
        break;
      }
      case 7: {  // square + sum
        g.sum(g.square(x));
        bind[x] = random_tensor({6}, rng);
        break;
      }
      case 8: {  // mean
        g.mean(x);
        bind[x] = random_tensor({9}, rng);
        break;
      }
      case 9: {  // quad form with symmetric matrix
        NodeId m = g.input("m");
        g.quad_form(x, m);
        bind[x] = random_tensor({4}, rng);
        Tensor mm = random_tensor({4, 4}, rng);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < i; ++j) mm.at(i, j) = mm.at(j, i);
        bind[m] = mm;
        break;
      }
    }
    CHECK(fd_check(g, bind, x, h) <= 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("grad is linear in the objective") {
  std::mt19937_64 rng(5);
  // f = sum(x^2), g = sum(relu(x)); compare grad(a*f + b*g) to the combination
  const float a = 1.75f, b = -0.5f;
  Tensor x0 = random_tensor({6}, rng, 0.1f, 1.0f);

  Graph combined;
  NodeId xc = combined.input("x");
  NodeId fc = combined.sum(combined.square(xc));
  NodeId gc = combined.sum(combined.relu(xc));
  combined.add(combined.scale(fc, a), combined.scale(gc, b));
  combined.forward({{xc, x0}});
  Tensor combo = combined.grad(combined.output(), {xc}).at(xc);

  Graph fg;
  NodeId xf = fg.input("x");
  fg.sum(fg.square(xf));
  fg.forward({{xf, x0}});
  Tensor gf = fg.grad(fg.output(), {xf}).at(xf);

  Graph gg;
  NodeId xg = gg.input("x");
  gg.sum(gg.relu(xg));
  gg.forward({{xg, x0}});
  Tensor ggrad = gg.grad(gg.output(), {xg}).at(xg);

  for (int64_t i = 0; i < x0.size(); ++i) {
    CHECK(combo.at(i) == doctest::Approx(a * gf.at(i) + b * ggrad.at(i)).epsilon(1e-6));
  }
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(11);
  Graph g;
  NodeId x = g.input("x");
  NodeId w = g.input("w");
  g.l2_normalize_rows(g.relu(g.matmul(x, w)));
  Bindings bind{{x, random_tensor({4, 6}, rng)}, {w, random_tensor({6, 3}, rng)}};
  const Tensor first = g.forward(bind);
  const Tensor second = g.forward(bind);
  CHECK(first == second);
}

TEST_CASE("finite outputs on finite inputs") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    NodeId x = g.input("x");
    NodeId onehot = g.input("onehot");
    NodeId feats = g.l2_normalize_rows(g.relu(x));
    NodeId loss = g.softmax_cross_entropy(g.scale(x, 30.0f), onehot);
    g.add(g.sum(feats), loss);
    Tensor oh({3, 5});
    for (int i = 0; i < 3; ++i) oh.at(i, trial % 5) = 1.0f;
    Bindings bind{{x, random_tensor({3, 5}, rng, -60.0f, 60.0f)}, {onehot, oh}};
    CHECK(g.forward(bind).all_finite());
  }
}

TEST_CASE("shape errors name the op and shapes") {
  Graph g;
  NodeId a = g.input("a"), b = g.input("b");
  g.matmul(a, b);
  CHECK_THROWS_WITH_AS(
      g.forward({{a, Tensor::matrix({{1, 2}})}, {b, Tensor::matrix({{1, 2}})}}),
      doctest::Contains("matrix-multiply"), Error);

  Graph g2;
  NodeId c = g2.input("c"), d = g2.input("d");
  g2.add(c, d);
  CHECK_THROWS_WITH_AS(
      g2.forward({{c, Tensor::vector({1, 2})}, {d, Tensor::vector({1, 2, 3})}}),
      doctest::Contains("add"), Error);
}

TEST_CASE("unbound root error names the root") {
  Graph g;
  NodeId x = g.input("gallery_pixels");
  NodeId y = g.input("other");
  g.add(x, y);
  CHECK_THROWS_WITH_AS(g.forward({{x, Tensor::vector({1})}}),
                       doctest::Contains("other"), Error);
}

TEST_CASE("grad rejects non-scalar outputs and non-root targets") {
  Graph g;
  NodeId x = g.input("x");
  NodeId y = g.square(x);
  g.forward({{x, Tensor::vector({1, 2})}});
  CHECK_THROWS_WITH_AS(g.grad(y, {x}), doctest::Contains("scalar"), Error);
  NodeId s = g.sum(y);
  g.forward({{x, Tensor::vector({1, 2})}});
  CHECK_THROWS_AS(g.grad(s, {y}), Error);
  CHECK_THROWS_AS(g.grad(s, {941}), Error);
}

TEST_CASE("grad of unreachable root is zero") {
  Graph g;
  NodeId x = g.input("x");
  NodeId c = g.input("c");
  NodeId out = g.sum(g.square(x));
  g.forward({{x, Tensor::vector({1, 2})}, {c, Tensor::vector({5, 5, 5})}});
  auto grads = g.grad(out, {c});
  CHECK(grads.at(c).shape() == std::vector<int>{3});
  for (int i = 0; i < 3; ++i) CHECK(grads.at(c).at(i) == 0.0f);
}

}  // TEST_SUITE
