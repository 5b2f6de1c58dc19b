#include <doctest.h>

#include <cmath>
#include <limits>

#include "deeptrader/layers.hpp"
#include "deeptrader/optim.hpp"

using namespace deeptrader;
using namespace deeptrader::nn;

namespace {

OptimizerConfig plain(double lr = 0.001, double wd = 0.0) {
  OptimizerConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = wd;
  return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradient with zero decay leaves parameters unchanged") {
  Parameter p("p", Tensor({3}, {1.0, -2.0, 0.5}));
  const Tensor before = p.value;
  CHECK(adam_step({&p}, {Tensor({3})}, plain()));
  CHECK(p.value.data == before.data);
  CHECK(p.step_count == 1);
}

TEST_CASE("adam: first step moves by ~lr for a unit gradient") {
  Parameter p("p", Tensor({1}, {1.0}));
  CHECK(adam_step({&p}, {Tensor({1}, {1.0})}, plain(0.001)));
  // bias-corrected m_hat/sqrt(v_hat) = 1 on the first step
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.00099999999).epsilon(1e-10));
}

TEST_CASE("adam: joint clip makes large gradients scale-invariant") {
  // both gradients exceed the unit norm, so both clip to the same direction
  Parameter p1("p1", Tensor({2}, {0.3, -0.4}));
  Parameter p2 = p1;
  const Tensor g(Shape{2}, {6.0, 8.0});  // norm 10
  Tensor g_scaled = g;
  for (double& v : g_scaled.data) v *= 17.0;
  CHECK(adam_step({&p1}, {g}, plain()));
  CHECK(adam_step({&p2}, {g_scaled}, plain()));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(p1.value[i] == doctest::Approx(p2.value[i]).epsilon(1e-12));
    CHECK(p1.adam_m[i] == doctest::Approx(p2.adam_m[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam: clip applies to the joint norm across parameters") {
  // one parameter's gradient is small, but the joint norm still trips
  Parameter a("a", Tensor({1}, {0.0}));
  Parameter b("b", Tensor({1}, {0.0}));
  const OptimizerConfig cfg = plain(1.0);
  // joint norm sqrt(3^2+4^2)=5 -> scaled by 1/5
  CHECK(adam_step({&a, &b}, {Tensor({1}, {3.0}), Tensor({1}, {4.0})}, cfg));
  // first-step adam moves by lr * sign regardless of magnitude, so compare
  // against an unclipped run with the already-normalized gradients
  Parameter a2("a2", Tensor({1}, {0.0}));
  Parameter b2("b2", Tensor({1}, {0.0}));
  CHECK(adam_step({&a2, &b2}, {Tensor({1}, {0.6}), Tensor({1}, {0.8})}, cfg));
  CHECK(a.value[0] == doctest::Approx(a2.value[0]).epsilon(1e-12));
  CHECK(b.value[0] == doctest::Approx(b2.value[0]).epsilon(1e-12));
}

TEST_CASE("adam: maximize equals minimizing the negated objective") {
  RngStream rng(31);
  Parameter p("p", Tensor({6}));
  for (double& v : p.value.data) v = rng.normal();
  Parameter q = p;

  Tensor grad(Shape{6});
  for (double& v : grad.data) v = rng.normal();
  Tensor neg = grad;
  for (double& v : neg.data) v = -v;

  OptimizerConfig cfg = plain(0.01, 0.001);
  CHECK(adam_step({&p}, {grad}, cfg, /*maximize=*/true));
  CHECK(adam_step({&q}, {neg}, cfg, /*maximize=*/false));
  CHECK(p.value.data == q.value.data);
  CHECK(p.adam_m.data == q.adam_m.data);
  CHECK(p.adam_v.data == q.adam_v.data);
}

TEST_CASE("adam: non-finite gradients reject the step untouched") {
  Parameter p("p", Tensor({2}, {1.0, 2.0}));
  Tensor bad(Shape{2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_FALSE(adam_step({&p}, {bad}, plain()));
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == 2.0);
  CHECK(p.step_count == 0);
  CHECK(p.adam_m[0] == 0.0);
}

TEST_CASE("adam: weight decay pulls toward zero even when maximizing") {
  Parameter p("p", Tensor({1}, {5.0}));
  OptimizerConfig cfg = plain(0.1, 0.01);
  CHECK(adam_step({&p}, {Tensor({1})}, cfg, /*maximize=*/true));
  CHECK(p.value[0] < 5.0);
}

TEST_CASE("kaiming: sample variance matches 2/fan_in") {
  RngStream rng(32);
  Tensor w({1000000});
  kaiming_init(w, 2, rng);
  double mean = 0;
  for (double v : w.data) mean += v;
  mean /= w.size();
  double var = 0;
  for (double v : w.data) var += (v - mean) * (v - mean);
  var /= w.size();
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("kaiming: layer biases start at exactly zero") {
  RngStream rng(33);
  DenseLayer layer("fc", 8, 4, rng);
  for (double v : layer.bias.value.data) CHECK(v == 0.0);
  Conv1dLayer conv("conv", 6, 3, 3, rng);
  for (double v : conv.bias.value.data) CHECK(v == 0.0);
  LstmLayer cell("cell", 5, 3, rng);
  for (double v : cell.bias.value.data) CHECK(v == 0.0);
}

TEST_CASE("kaiming: fixed seed reproduces the draw sequence") {
  RngStream a(34), b(34);
  Tensor w1({64}), w2({64});
  kaiming_init(w1, 10, a);
  kaiming_init(w2, 10, b);
  CHECK(w1.data == w2.data);
}

TEST_CASE("grad_check: exact for quadratics") {
  Parameter p("p", Tensor({4}, {0.5, -1.5, 2.0, 0.1}));
  auto build = [&](Graph& g) { return sum(square(g.param(p))); };
  CHECK(grad_check(build, {&p}) < 1e-8);
}

TEST_CASE("post-clip joint gradient norm stays within the bound") {
  // verified through the optimizer's observable effect: a gradient at the
  // clip boundary and any larger rescaling land on identical parameters
  RngStream rng(35);
  for (int rep = 0; rep < 5; ++rep) {
    Parameter p1 = Parameter("p", Tensor({8}));
    for (double& v : p1.value.data) v = rng.normal();
    Parameter p2 = p1;
    Tensor g1(Shape{8});
    for (double& v : g1.data) v = rng.normal();
    double norm = 0;
    for (double v : g1.data) norm += v * v;
    norm = std::sqrt(norm);
    Tensor unit = g1;
    for (double& v : unit.data) v /= norm;  // norm exactly 1 = clip_norm
    Tensor big = g1;
    for (double& v : big.data) v *= 1e6 / norm;
    CHECK(adam_step({&p1}, {unit}, plain()));
    CHECK(adam_step({&p2}, {big}, plain()));
    for (std::size_t i = 0; i < 8; ++i) CHECK(p1.value[i] == doctest::Approx(p2.value[i]).epsilon(1e-9));
  }
}
