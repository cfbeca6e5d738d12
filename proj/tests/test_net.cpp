#include <cmath>

#include "doctest.h"
#include "lidkit/net.hpp"
#include "oracles.hpp"

using namespace lidkit;

TEST_CASE("init draws Glorot-uniform weights and zero biases") {
  Mlp m = init({4, 4}, 123);
  REQUIRE(m.layers.size() == 1);
  for (double b : m.layers[0].bias) CHECK(b == 0.0);

  Mlp wide = init({100, 100}, 9);
  double bound = std::sqrt(6.0 / 200.0);
  for (double w : wide.layers[0].weights.a) {
    CHECK(std::fabs(w) <= bound);
  }

  Mlp again = init({100, 100}, 9);
  CHECK(wide.layers[0].weights.a == again.layers[0].weights.a);

  CHECK_THROWS_AS(init({}, 1), InputError);
  CHECK_THROWS_AS(init({5}, 1), InputError);
}

TEST_CASE("forward runs the affine+ReLU chain") {
  Mlp zero;
  zero.layers.push_back({Matrix(3, 2), Vec(3, 0.0)});
  Matrix x(1, 2);
  x(0, 0) = 1.5;
  x(0, 1) = -2.0;
  Activations acts = forward(zero, x);
  for (double v : acts.output().a) CHECK(v == 0.0);

  Mlp ident;
  ident.layers.push_back({Matrix::identity(3), Vec(3, 0.0)});
  Matrix x3(2, 3);
  for (std::size_t i = 0; i < x3.a.size(); ++i) x3.a[i] = double(i) - 2.5;
  CHECK(forward(ident, x3).output().a == x3.a);

  Matrix wrong(1, 5);
  CHECK_THROWS_AS(forward(ident, wrong), InputError);
}

TEST_CASE("forward matches a plain matrix-multiply oracle") {
  Mlp m = init({5, 7, 3}, 42);
  Rng rng(11);
  Matrix x(4, 5);
  for (double& v : x.a) v = rng.gaussian();

  Matrix h = oracles::matmul_plain(x, transpose(m.layers[0].weights));
  for (std::size_t r = 0; r < h.rows; ++r)
    for (std::size_t c = 0; c < h.cols; ++c) {
      h(r, c) += m.layers[0].bias[c];
      if (h(r, c) < 0.0) h(r, c) = 0.0;
    }
  Matrix out = oracles::matmul_plain(h, transpose(m.layers[1].weights));
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += m.layers[1].bias[c];

  Matrix got = forward(m, x).output();
  REQUIRE(got.a.size() == out.a.size());
  for (std::size_t i = 0; i < got.a.size(); ++i)
    CHECK(got.a[i] == doctest::Approx(out.a[i]).epsilon(1e-12));
}

TEST_CASE("forward is pure") {
  Mlp m = init({6, 4, 2}, 3);
  Rng rng(4);
  Matrix x(3, 6);
  for (double& v : x.a) v = rng.gaussian();
  CHECK(forward(m, x).output().a == forward(m, x).output().a);
}

TEST_CASE("backward propagates exact gradients") {
  SUBCASE("zero output grad gives zero gradients") {
    Mlp m = init({4, 5, 3}, 17);
    Matrix x(2, 4);
    x.a = {0.3, -0.2, 0.9, 1.1, -0.4, 0.5, 0.2, -1.0};
    Activations acts = forward(m, x);
    BackwardResult res = backward(m, acts, Matrix(2, 3));
    for (const LayerGrad& g : res.grads) {
      for (double v : g.d_weights.a) CHECK(v == 0.0);
      for (double v : g.d_bias) CHECK(v == 0.0);
    }
  }

  SUBCASE("single linear layer, loss = sum of outputs") {
    Mlp m = init({3, 2}, 5);
    Matrix x(1, 3);
    x.a = {0.5, -1.5, 2.0};
    Activations acts = forward(m, x);
    Matrix g(1, 2, 1.0);  // d(sum)/d(out) = 1
    BackwardResult res = backward(m, acts, g);
    // each weight row gradient equals x
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(res.grads[0].d_weights(r, c) == doctest::Approx(x.a[c]));
    for (double b : res.grads[0].d_bias) CHECK(b == doctest::Approx(1.0));
  }

  SUBCASE("matches finite differences on a random net") {
    Mlp m = init({5, 8, 6, 3}, 77);
    Rng rng(78);
    Matrix x(4, 5);
    for (double& v : x.a) v = rng.gaussian();
    // loss: weighted sum of squared outputs (smooth, nontrivial)
    Matrix coef(4, 3);
    for (double& v : coef.a) v = rng.gaussian();
    auto loss_at = [&](const Vec& flat) {
      Mlp probe = m;
      std::size_t cursor = 0;
      read_params(probe, flat, cursor);
      Matrix out = forward(probe, x).output();
      double s = 0.0;
      for (std::size_t i = 0; i < out.a.size(); ++i)
        s += coef.a[i] * out.a[i] * out.a[i];
      return s;
    };
    Vec flat;
    append_params(m, flat);
    Vec fd = oracles::fd_gradient(loss_at, flat);

    Activations acts = forward(m, x);
    Matrix g(4, 3);
    for (std::size_t i = 0; i < g.a.size(); ++i)
      g.a[i] = 2.0 * coef.a[i] * acts.output().a[i];
    BackwardResult res = backward(m, acts, g);
    Vec analytic;
    append_grads(res.grads, analytic);
    REQUIRE(analytic.size() == fd.size());
    CHECK(oracles::max_rel_error(analytic, fd) < 1e-6);
  }
}

TEST_CASE("softmax is stable and normalized") {
  Vec equal(7, 3.25);
  Vec p = softmax(equal);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));

  Vec two = {0.0, std::log(3.0)};
  Vec q = softmax(two);
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-12));

  Vec logits = {0.1, -0.7, 2.2, 0.0};
  Vec shifted = logits;
  for (double& v : shifted) v += 1000.0;
  Vec a = softmax(logits), b = softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::fabs(a[i] - b[i]) < 1e-12);

  double s = 0.0;
  for (double v : a) s += v;
  CHECK(std::fabs(s - 1.0) < 1e-12);

  Vec bad = {0.0, std::nan("")};
  CHECK_THROWS_AS(softmax(bad), NumericError);
}
