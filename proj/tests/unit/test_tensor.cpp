#include <doctest.h>

#include <cmath>

#include "deeptrader/layers.hpp"
#include "deeptrader/optim.hpp"

using namespace deeptrader;
using namespace deeptrader::nn;

namespace {

Tensor randn(Shape s, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

Parameter randn_param(const char* name, Shape s, RngStream& rng, double scale = 1.0) {
  return Parameter(name, randn(std::move(s), rng, scale));
}

}  // namespace

TEST_CASE("dense: hand values") {
  Graph g;
  Var x = g.constant(Tensor({1, 2}, {3, 4}));
  Var w = g.constant(Tensor({1, 2}, {1, 2}));
  Var b = g.constant(Tensor({1}, {0.5}));
  Var y = dense(x, w, b);
  CHECK(y.value()[0] == doctest::Approx(11.5));

  // identity weights, zero bias
  Graph g2;
  Var x2 = g2.constant(Tensor({1, 2}, {3, 4}));
  Var w2 = g2.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var b2 = g2.constant(Tensor({2}));
  Var y2 = dense(x2, w2, b2);
  CHECK(y2.value()[0] == 3.0);
  CHECK(y2.value()[1] == 4.0);
}

TEST_CASE("dense: gradient of sum(out) w.r.t. weights is ones x input") {
  Graph g;
  Var x = g.constant(Tensor({1, 3}, {2, -1, 4}));
  Parameter W("W", Tensor({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}));
  Parameter b("b", Tensor({2}));
  Var y = sum(dense(x, g.param(W), g.param(b)));
  g.backward(y);
  const Tensor dw = g.grad_of(W);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(dw[i * 3 + 0] == doctest::Approx(2));
    CHECK(dw[i * 3 + 1] == doctest::Approx(-1));
    CHECK(dw[i * 3 + 2] == doctest::Approx(4));
  }
}

TEST_CASE("conv1d: hand cross-correlation") {
  Graph g;
  Var x = g.constant(Tensor({1, 1, 4}, {1, 2, 3, 4}));
  Var k = g.constant(Tensor({1, 1, 3}, {1, 0, -1}));
  Var b = g.constant(Tensor({1}));
  Var y = conv1d(x, k, b);
  REQUIRE(y.value().size() == 2);
  CHECK(y.value()[0] == doctest::Approx(-2));
  CHECK(y.value()[1] == doctest::Approx(-2));
}

TEST_CASE("conv1d: zero input passes the bias through") {
  Graph g;
  RngStream rng(5);
  Var x = g.constant(Tensor({2, 3, 6}));
  Var k = g.constant(randn({4, 3, 3}, rng));
  Var b = g.constant(Tensor({4}, {1, 2, 3, 4}));
  Var y = conv1d(x, k, b);
  const Tensor& t = y.value();
  REQUIRE(t.shape == Shape{2, 4, 4});
  for (std::size_t bi = 0; bi < 2; ++bi)
    for (std::size_t f = 0; f < 4; ++f)
      for (std::size_t o = 0; o < 4; ++o) CHECK(t[(bi * 4 + f) * 4 + o] == doctest::Approx(f + 1.0));
}

TEST_CASE("conv1d: output width 20 -> 18") {
  Graph g;
  RngStream rng(6);
  Var x = g.constant(randn({1, 3, 20}, rng));
  Var k = g.constant(randn({32, 3, 3}, rng));
  Var b = g.constant(Tensor({32}));
  CHECK(conv1d(x, k, b).value().shape == Shape{1, 32, 18});
}

TEST_CASE("maxpool1d") {
  Graph g;
  Var x = g.constant(Tensor({1, 1, 4}, {1, 3, 2, 0}));
  Var y = maxpool1d(x);
  CHECK(y.value().shape == Shape{1, 1, 2});
  CHECK(y.value()[0] == 3);
  CHECK(y.value()[1] == 2);

  // constant input stays constant; odd width drops the trailing element
  Var c = g.constant(Tensor({1, 2, 5}, 7.0));
  Var yc = maxpool1d(c);
  CHECK(yc.value().shape == Shape{1, 2, 2});
  for (double v : yc.value().data) CHECK(v == 7.0);
}

TEST_CASE("leaky_relu values") {
  Graph g;
  Var x = g.constant(Tensor({3}, {5, -2, 0}));
  Var y = leaky_relu(x, 0.01);
  CHECK(y.value()[0] == doctest::Approx(5));
  CHECK(y.value()[1] == doctest::Approx(-0.02));
  CHECK(y.value()[2] == doctest::Approx(0));
}

TEST_CASE("leaky_relu subgradient at zero takes the positive branch") {
  Graph g;
  Var x = g.input(Tensor({1}, {0.0}));
  Var y = sum(leaky_relu(x, 0.01));
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("dropout: eval and p=0 are exact identities") {
  RngStream rng(7);
  Dropout drop{0.2};
  Graph g;
  Var x = g.constant(randn({4, 9}, rng));
  Var y = drop.forward(g, x, Mode::eval, nullptr);
  CHECK(y.id == x.id);  // same node, bit-identical passthrough

  Dropout zero{0.0};
  Var y0 = zero.forward(g, x, Mode::train, &rng);
  CHECK(y0.id == x.id);
}

TEST_CASE("dropout: train-mode zero fraction approximates p over 1e5 elements") {
  RngStream rng(8);
  Dropout drop{0.2};
  Graph g;
  Var x = g.constant(Tensor({100000}, 1.0));
  Var y = drop.forward(g, x, Mode::train, &rng);
  std::size_t zeros = 0;
  double survivor = 0;
  for (double v : y.value().data) {
    if (v == 0.0) {
      ++zeros;
    } else {
      survivor = v;
    }
  }
  const double frac = static_cast<double>(zeros) / 100000.0;
  CHECK(frac == doctest::Approx(0.2).epsilon(0.05));  // within 0.01 absolute
  CHECK(std::abs(frac - 0.2) < 0.01);
  CHECK(survivor == doctest::Approx(1.0 / 0.8));  // inverted scaling
}

TEST_CASE("batchnorm: train standardizes per feature") {
  RngStream rng(9);
  BatchNorm1d bn("bn", 5);
  Graph g;
  Var x = g.constant(randn({16, 5}, rng, 3.0));
  Var y = bn.forward(g, x, Mode::train);
  for (std::size_t f = 0; f < 5; ++f) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < 16; ++b) mean += y.value()[b * 5 + f];
    mean /= 16;
    for (std::size_t b = 0; b < 16; ++b) {
      const double d = y.value()[b * 5 + f] - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-5);
  }
}

TEST_CASE("batchnorm: scale and shift restore an affine output") {
  RngStream rng(10);
  BatchNorm1d bn("bn", 3);
  for (double& v : bn.gamma.value.data) v = 2.0;
  for (double& v : bn.beta.value.data) v = 3.0;
  Graph g;
  Var x = g.constant(randn({32, 3}, rng));
  Var y = bn.forward(g, x, Mode::train);
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < 32; ++b) mean += y.value()[b * 3 + f];
    mean /= 32;
    for (std::size_t b = 0; b < 32; ++b) {
      const double d = y.value()[b * 3 + f] - mean;
      var += d * d;
    }
    var /= 32;
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("batchnorm: eval mode with unit running stats is scale/shift only") {
  BatchNorm1d bn("bn", 2);
  Graph g;
  Var x = g.constant(Tensor({1, 2}, {0.3, -0.7}));
  Var y = bn.forward(g, x, Mode::eval);
  CHECK(y.value()[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(y.value()[1] == doctest::Approx(-0.7).epsilon(1e-6));
}

TEST_CASE("batchnorm: train-mode batch of one is rejected") {
  BatchNorm1d bn("bn", 2);
  Graph g;
  Var x = g.constant(Tensor({1, 2}, {0.3, -0.7}));
  CHECK_THROWS_AS(bn.forward(g, x, Mode::train), std::invalid_argument);
}

TEST_CASE("lstm: zero weights and states give zero outputs") {
  RngStream rng(11);
  LstmLayer cell("cell", 4, 3, rng);
  for (double& v : cell.weights.value.data) v = 0;
  Graph g;
  Var x = g.constant(Tensor({2, 3}));
  auto [h0, c0] = cell.zero_state(g, 2);
  auto [h, c] = cell.step(g, x, h0, c0);
  for (double v : h.value().data) CHECK(v == doctest::Approx(0.0));
  for (double v : c.value().data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("lstm: saturated forget gate carries the cell state") {
  RngStream rng(12);
  LstmLayer cell("cell", 2, 1, rng);
  // weights zero, forget bias huge, input bias hugely negative
  for (double& v : cell.weights.value.data) v = 0;
  cell.bias.value[0] = -50;  // i ~ 0
  cell.bias.value[1] = -50;
  cell.bias.value[2] = 50;   // f ~ 1
  cell.bias.value[3] = 50;
  Graph g;
  Var x = g.constant(Tensor({1, 1}, {0.7}));
  Var h0 = g.constant(Tensor({1, 2}, {0.1, -0.2}));
  Var c0 = g.constant(Tensor({1, 2}, {0.45, -0.3}));
  auto [h, c] = cell.step(g, x, h0, c0);
  CHECK(c.value()[0] == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(c.value()[1] == doctest::Approx(-0.3).epsilon(1e-9));
}

TEST_CASE("lstm: single-unit golden trace") {
  // W rows are the [i,f,o,g] gates over [h_prev, x]
  RngStream rng(13);
  LstmLayer cell("cell", 1, 1, rng);
  cell.weights.value = Tensor({4, 2}, {0.5, 1.0, -0.3, 0.2, 0.8, -0.5, 1.2, 0.7});
  cell.bias.value = Tensor({4}, {0.1, -0.1, 0.2, 0.0});

  Graph g;
  Var x1 = g.constant(Tensor({1, 1}, {0.3}));
  Var h0 = g.constant(Tensor({1, 1}, {0.2}));
  Var c0 = g.constant(Tensor({1, 1}, {-0.4}));
  auto [h1, c1] = cell.step(g, x1, h0, c0);
  CHECK(c1.value()[0] == doctest::Approx(0.072606647634223642).epsilon(1e-14));
  CHECK(h1.value()[0] == doctest::Approx(0.040030906505317126).epsilon(1e-14));

  Var x2 = g.constant(Tensor({1, 1}, {-0.5}));
  auto [h2, c2] = cell.step(g, x2, h1, c1);
  CHECK(c2.value()[0] == doctest::Approx(-0.086570748114824722).epsilon(1e-13));
  CHECK(h2.value()[0] == doctest::Approx(-0.053386973202191171).epsilon(1e-13));
}

TEST_CASE("gradients: every layer matches central finite differences") {
  RngStream rng(14);
  const double tol = 1e-4;

  SUBCASE("dense") {
    Parameter W = randn_param("W", {3, 4}, rng);
    Parameter b = randn_param("b", {3}, rng);
    const Tensor x = randn({5, 4}, rng);
    auto build = [&](Graph& g) { return sum(vtanh(dense(g.constant(x), g.param(W), g.param(b)))); };
    CHECK(grad_check(build, {&W, &b}) < tol);
  }
  SUBCASE("conv + maxpool + lrelu") {
    Parameter K = randn_param("K", {4, 2, 3}, rng);
    Parameter b = randn_param("b", {4}, rng);
    const Tensor x = randn({3, 2, 9}, rng);
    auto build = [&](Graph& g) {
      return sum(vtanh(maxpool1d(leaky_relu(conv1d(g.constant(x), g.param(K), g.param(b)), 0.01))));
    };
    CHECK(grad_check(build, {&K, &b}) < tol);
  }
  SUBCASE("batchnorm train mode") {
    BatchNorm1d bn("bn", 3);
    RngStream r2(15);
    for (double& v : bn.gamma.value.data) v = 1.0 + 0.3 * r2.normal();
    for (double& v : bn.beta.value.data) v = 0.2 * r2.normal();
    const Tensor x = randn({6, 3}, rng);
    Parameter xin("x", x);
    auto build = [&](Graph& g) {
      // running-stat updates do not affect train-mode outputs
      return sum(vtanh(bn.forward(g, g.param(xin), Mode::train)));
    };
    CHECK(grad_check(build, {&bn.gamma, &bn.beta, &xin}) < tol);
  }
  SUBCASE("batchnorm eval mode") {
    BatchNorm1d bn("bn", 3);
    RngStream r2(16);
    for (double& v : bn.running_mean.data) v = 0.4 * r2.normal();
    for (double& v : bn.running_var.data) v = 1.0 + 0.5 * r2.uniform();
    Parameter xin = randn_param("x", {4, 3}, rng);
    auto build = [&](Graph& g) { return sum(vtanh(bn.forward(g, g.param(xin), Mode::eval))); };
    CHECK(grad_check(build, {&bn.gamma, &bn.beta, &xin}) < tol);
  }
  SUBCASE("lstm step through time") {
    LstmLayer cell("cell", 3, 2, rng);
    const Tensor x1 = randn({2, 2}, rng);
    const Tensor x2 = randn({2, 2}, rng);
    auto build = [&](Graph& g) {
      auto [h, c] = cell.zero_state(g, 2);
      std::tie(h, c) = cell.step(g, g.constant(x1), h, c);
      std::tie(h, c) = cell.step(g, g.constant(x2), h, c);
      return sum(h);
    };
    CHECK(grad_check(build, {&cell.weights, &cell.bias}) < tol);
  }
  SUBCASE("elementwise chain") {
    Parameter a = randn_param("a", {7}, rng);
    Parameter b = randn_param("b", {7}, rng);
    auto build = [&](Graph& g) {
      Var va = g.param(a), vb = g.param(b);
      Var y = mul(vsigmoid(va), vtanh(vb));
      y = add(y, square(sub(va, vb)));
      y = scale(y, 0.7);
      return mean(y);
    };
    CHECK(grad_check(build, {&a, &b}) < 1e-6);
  }
  SUBCASE("concat and slice") {
    Parameter a = randn_param("a", {3, 2}, rng);
    Parameter b = randn_param("b", {3, 4}, rng);
    auto build = [&](Graph& g) {
      Var cat = concat_cols(g.param(a), g.param(b));
      Var left = slice_cols(cat, 0, 3);
      return sum(square(left));
    };
    CHECK(grad_check(build, {&a, &b}) < 1e-6);
  }
}

TEST_CASE("graph: repeated param binds accumulate one gradient") {
  Parameter w("w", Tensor({1}, {2.0}));
  Graph g;
  Var a = g.param(w);
  Var b = g.param(w);  // same node
  CHECK(a.id == b.id);
  Var y = mul(a, b);  // w^2
  g.backward(sum(y));
  CHECK(g.grad_of(w)[0] == doctest::Approx(4.0));  // d(w^2)/dw = 2w
}

TEST_CASE("fixed seed reproduces forward and backward bit-exactly") {
  auto run = [] {
    RngStream rng(77);
    Parameter W = randn_param("W", {4, 6}, rng);
    Parameter b = randn_param("b", {4}, rng);
    Dropout drop{0.3};
    RngStream drop_rng(78);
    Graph g;
    Var x = g.constant(randn({5, 6}, rng));
    Var y = sum(drop.forward(g, vtanh(dense(x, g.param(W), g.param(b))), Mode::train, &drop_rng));
    g.backward(y);
    return std::make_pair(y.value()[0], g.grad_of(W).data);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}
