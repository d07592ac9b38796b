#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "zoo/gradcheck.hpp"
#include "zoo/optim.hpp"
#include "zoo/rng.hpp"
#include "zoo/tape.hpp"

using namespace zoo;
using namespace zoo::ag;

namespace {

Tensor rand_tensor(Shape s, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("op forward examples") {
  Tape t;
  Var x = t.constant(Tensor({2}, {0.0, M_PI / 2}));
  Var y = sin(x);
  CHECK(t.val(y)[0] == doctest::Approx(0.0));
  CHECK(t.val(y)[1] == doctest::Approx(1.0));

  Rng rng(7);
  Tensor a = rand_tensor({3, 3}, rng);
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at2(i, i) = 1.0;
  Var va = t.constant(a);
  Var vi = t.constant(eye);
  Var prod = matmul(vi, va);
  for (std::size_t i = 0; i < 9; ++i) CHECK(t.val(prod)[i] == a[i]);

  Var p = t.constant(Tensor({2}, {0.1, 0.1}));
  Var q = t.constant(Tensor({2}, {0.0, 0.0}));
  CHECK(t.val(mse(p, q))[0] == doctest::Approx(0.01));
}

TEST_CASE("shape errors name the op and shapes") {
  Tape t;
  Var a = t.constant(Tensor({2, 3}));
  Var b = t.constant(Tensor({4, 5}));
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape mismatch (2x3) vs (4x5)", ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mse(a, b), ShapeError);
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum(w*x) has gradient x") {
    Tape t;
    Tensor xv({3}, {1.5, -2.0, 0.25});
    Var w = t.leaf(Tensor({3}, {0.3, 0.1, -0.7}), true);
    Var x = t.constant(xv);
    Var loss = sum(mul(w, x));
    t.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.grad(w)[i] == xv[i]);
  }
  SUBCASE("constant loss gives zero gradients") {
    Tape t;
    Var w = t.leaf(Tensor({2}, {1.0, 2.0}), true);
    Var c = t.constant(Tensor::scalar(5.0));
    Var loss = mul(c, c);
    t.backward(loss);
    CHECK(t.grad(w)[0] == 0.0);
    CHECK(t.grad(w)[1] == 0.0);
  }
  SUBCASE("loss must be scalar") {
    Tape t;
    Var w = t.leaf(Tensor({2}, {1.0, 2.0}), true);
    CHECK_THROWS_AS(t.backward(w), ShapeError);
  }
  SUBCASE("backward twice is identical") {
    Tape t;
    Rng rng(3);
    Var w = t.leaf(rand_tensor({4, 4}, rng), true);
    Var x = t.constant(rand_tensor({4, 4}, rng));
    Var loss = mean(mul(sin(matmul(w, x)), w));
    t.backward(loss);
    Tensor g1 = t.grad(w);
    t.backward(loss);
    Tensor g2 = t.grad(w);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
  }
}

TEST_CASE("mse(sin(w x), y) gradient matches finite differences") {
  Rng rng(11);
  Tensor w = rand_tensor({3, 4}, rng);
  Tensor x = rand_tensor({4, 2}, rng);
  Tensor y = rand_tensor({3, 2}, rng, -1.0, 1.0);
  auto f = [&](Tape& t, const std::vector<Var>& in) {
    Var xx = t.constant(x);
    Var yy = t.constant(y);
    return mse(sin(matmul(in[0], xx)), yy);
  };
  auto rep = grad_check(f, {w}, 1e-6);
  CHECK(rep.max_rel_err < 1e-6);
}

// Every op kind: gradients match central differences on random inputs,
// 100 trials each, inputs in [-2, 2] (shifted where the domain demands).
TEST_CASE("finite-difference property for all op kinds") {
  struct Case {
    const char* name;
    ScalarProgram prog;
    Shape sa, sb;
    double lo, hi;
    bool two_inputs;
  };
  auto wrap1 = [](Var (*op)(Var)) {
    return [op](Tape& t, const std::vector<Var>& in) { return mean(op(in[0])); };
  };
  std::vector<Case> cases;
  cases.push_back({"add", [](Tape& t, const std::vector<Var>& in) {
                     return mean(add(in[0], in[1]));
                   }, {3, 4}, {3, 4}, -2, 2, true});
  cases.push_back({"add.broadcast", [](Tape& t, const std::vector<Var>& in) {
                     return mean(add(in[0], in[1]));
                   }, {3, 4}, {4}, -2, 2, true});
  cases.push_back({"sub", [](Tape& t, const std::vector<Var>& in) {
                     return mean(sub(in[0], in[1]));
                   }, {2, 5}, {2, 5}, -2, 2, true});
  cases.push_back({"mul", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(in[0], in[1]));
                   }, {4, 3}, {4, 3}, -2, 2, true});
  cases.push_back({"mul.broadcast", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(in[0], in[1]));
                   }, {2, 3, 2}, {2, 1, 2}, -2, 2, true});
  cases.push_back({"div", [](Tape& t, const std::vector<Var>& in) {
                     return mean(div(in[0], in[1]));
                   }, {3, 3}, {3, 3}, 0.5, 2.5, true});
  cases.push_back({"matmul", [](Tape& t, const std::vector<Var>& in) {
                     return mean(matmul(in[0], in[1]));
                   }, {3, 4}, {4, 2}, -2, 2, true});
  cases.push_back({"sin", wrap1(&zoo::ag::sin), {3, 4}, {}, -2, 2, false});
  cases.push_back({"cos", wrap1(&zoo::ag::cos), {3, 4}, {}, -2, 2, false});
  cases.push_back({"tanh", wrap1(&zoo::ag::tanh), {3, 4}, {}, -2, 2, false});
  cases.push_back({"relu", wrap1(&zoo::ag::relu), {3, 4}, {}, -2, 2, false});
  cases.push_back({"exp", wrap1(&zoo::ag::exp), {3, 4}, {}, -2, 2, false});
  cases.push_back({"log", wrap1(&zoo::ag::log), {3, 4}, {}, 0.5, 2.5, false});
  cases.push_back({"sqrt", wrap1(&zoo::ag::sqrt), {3, 4}, {}, 0.5, 2.5, false});
  cases.push_back({"sigmoid", wrap1(&zoo::ag::sigmoid), {3, 4}, {}, -2, 2, false});
  cases.push_back({"sum", [](Tape& t, const std::vector<Var>& in) {
                     return sum(in[0]);
                   }, {3, 4}, {}, -2, 2, false});
  cases.push_back({"mean", [](Tape& t, const std::vector<Var>& in) {
                     return mean(in[0]);
                   }, {3, 4}, {}, -2, 2, false});
  cases.push_back({"sum_axis", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(sum_axis(in[0], 1), in[1]));
                   }, {3, 4, 2}, {3, 1, 2}, -2, 2, true});
  cases.push_back({"mse", [](Tape& t, const std::vector<Var>& in) {
                     return mse(in[0], in[1]);
                   }, {3, 4}, {3, 4}, -2, 2, true});
  cases.push_back({"softmax", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(softmax(in[0]), in[1]));
                   }, {3, 4}, {3, 4}, -2, 2, true});
  cases.push_back({"softmax_cross_entropy", [](Tape& t, const std::vector<Var>& in) {
                     return softmax_cross_entropy(in[0], {0, 2, 1});
                   }, {3, 4}, {}, -2, 2, false});
  cases.push_back({"concat", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(concat({in[0], in[1]}, 1), concat({in[1], in[0]}, 1)));
                   }, {3, 2}, {3, 2}, -2, 2, true});
  cases.push_back({"slice-gather", [](Tape& t, const std::vector<Var>& in) {
                     Var g = gather_rows(in[0], {2, 0, 2});
                     return mean(mul(narrow(g, 1, 1, 2), narrow(g, 1, 0, 2)));
                   }, {4, 4}, {}, -2, 2, false});
  cases.push_back({"broadcast", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(broadcast_to(in[0], {4, 3, 2}), in[1]));
                   }, {3, 2}, {4, 3, 2}, -2, 2, true});
  cases.push_back({"reshape", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(reshape(in[0], {2, 6}), reshape(in[1], {2, 6})));
                   }, {3, 4}, {4, 3}, -2, 2, true});
  cases.push_back({"transpose", [](Tape& t, const std::vector<Var>& in) {
                     return mean(matmul(transpose(in[0]), in[1]));
                   }, {3, 4}, {3, 2}, -2, 2, true});
  cases.push_back({"cumsum_exclusive", [](Tape& t, const std::vector<Var>& in) {
                     return mean(mul(cumsum_exclusive(in[0], 1), in[1]));
                   }, {2, 5, 2}, {2, 5, 2}, -2, 2, true});
  cases.push_back({"scale", [](Tape& t, const std::vector<Var>& in) {
                     return mean(add_scalar(scale(in[0], -1.7), 0.3));
                   }, {3, 4}, {}, -2, 2, false});

  Rng rng(1234);
  for (const Case& c : cases) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> point;
      point.push_back(rand_tensor(c.sa, rng, c.lo, c.hi));
      if (c.two_inputs) point.push_back(rand_tensor(c.sb, rng, c.lo, c.hi));
      auto rep = grad_check(c.prog, point, 1e-6);
      worst = std::max(worst, rep.max_rel_err);
    }
    CHECK_MESSAGE(worst < 1e-6, c.name << " worst rel err " << worst);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient is identity for all steps") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    Tensor g({3}, {0.0, 0.0, 0.0});
    Adam opt;
    for (int i = 0; i < 10; ++i) {
      opt.step({&p}, {&g}, 1e-3);
      CHECK(p[0] == 1.0);
      CHECK(p[1] == -2.0);
      CHECK(p[2] == 0.5);
    }
    CHECK(opt.step_count() == 10);
  }
  SUBCASE("first step is -lr g / (|g| + eps) after bias correction") {
    // m1 = (1-b1) g, v1 = (1-b2) g^2, mhat = g, vhat = g^2
    // update = -lr g / (|g| + eps)
    Tensor p({2}, {0.7, -0.3});
    Tensor g({2}, {0.4, -1.2});
    double lr = 1e-3, eps = 1e-8;
    Tensor expect = p;
    for (std::size_t i = 0; i < 2; ++i) expect[i] -= lr * g[i] / (std::fabs(g[i]) + eps);
    Adam opt;
    opt.step({&p}, {&g}, lr);
    CHECK(p[0] == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(expect[1]).epsilon(1e-12));
  }
  SUBCASE("constant gradient decreases parameter monotonically") {
    Tensor p({1}, {5.0});
    Tensor g({1}, {0.25});
    Adam opt;
    double prev = p[0];
    for (int i = 0; i < 1000; ++i) {
      opt.step({&p}, {&g}, 1e-3);
      CHECK(p[0] < prev);
      prev = p[0];
    }
  }
  SUBCASE("non-finite gradient is rejected with the parameter named") {
    Tensor p({2}, {1.0, 1.0});
    Tensor g({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
    Adam opt;
    std::vector<std::string> names = {"layer0.weight"};
    CHECK_THROWS_WITH_AS(opt.step({&p}, {&g}, 1e-3, &names),
                         "adam: non-finite gradient for layer0.weight", Error);
  }
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 1000, 1e-3, 1e-5) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(cosine_lr(1000, 1000, 1e-3, 1e-5) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(cosine_lr(500, 1000, 1e-3, 1e-5) == doctest::Approx(5.05e-4).epsilon(1e-12));
  CHECK(cosine_lr(2000, 1000, 1e-3, 1e-5) == 1e-5);  // clamps beyond total
  double prev = cosine_lr(0, 777, 3e-3, 1e-5);
  for (std::uint64_t s = 1; s <= 777; ++s) {
    double lr = cosine_lr(s, 777, 3e-3, 1e-5);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("grad_check oracle itself") {
  SUBCASE("linear program at machine epsilon scale") {
    Rng rng(5);
    Tensor w = rand_tensor({4}, rng);
    Tensor c = rand_tensor({4}, rng);
    auto f = [&](Tape& t, const std::vector<Var>& in) {
      return sum(mul(in[0], t.constant(c)));
    };
    auto rep = grad_check(f, {w}, 1e-6);
    CHECK(rep.max_rel_err < 1e-9);
  }
  SUBCASE("deliberately broken backward rule is caught") {
    // Emits sin(x) forward but uses the gradient of 2 sin(x).
    auto f = [](Tape& t, const std::vector<Var>& in) {
      const Tensor& x = t.val(in[0]);
      Tensor out(x.shape);
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::sin(x[i]);
      std::size_t pa = in[0].id;
      Var bad = t.emit(std::move(out), {in[0]}, [pa](Tape& t2, std::size_t self) {
        const Tensor& g = t2.grad_of(self);
        const Tensor& xv = t2.value_of(pa);
        double* gp = t2.grad_data(pa, xv.shape);
        for (std::size_t i = 0; i < xv.size(); ++i) gp[i] += 2.0 * g[i] * std::cos(xv[i]);
      });
      return mean(bad);
    };
    Rng rng(6);
    Tensor x = rand_tensor({8}, rng, 0.2, 1.2);
    auto rep = grad_check(f, {x}, 1e-6);
    CHECK(rep.max_rel_err > 1e-2);
  }
}
