#include "pvst/adam.hpp"
#include "pvst/gradcheck.hpp"
#include "pvst/gradient_suite.hpp"
#include "pvst/ops.hpp"
#include "pvst/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace pvst;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, Scalar lo = -1.0, Scalar hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  rng.fill_uniform(t.mutable_data(), lo, hi);
  return t;
}

bool bit_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * 8) == 0;
}

}  // namespace

TEST_CASE("relu clamps negatives") {
  Tensor x({3}, (Vec(3) << -1.0, 0.0, 2.0).finished());
  const Tensor y = relu(x);
  CHECK(y.data()[0] == 0.0);
  CHECK(y.data()[1] == 0.0);
  CHECK(y.data()[2] == 2.0);
}

TEST_CASE("sigmoid at zero is one half") {
  const Tensor y = sigmoid(Tensor::scalar(0.0));
  CHECK(y.value() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("channel-wise max takes column maxima") {
  Tensor x({3, 2}, (Vec(6) << 1, 5, 4, 2, 3, 3).finished());
  const Tensor y = max_over_points(x);
  CHECK(y.data()[0] == 4.0);
  CHECK(y.data()[1] == 5.0);
}

TEST_CASE("matmul rejects incompatible shapes naming the extents") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("unknown primitive name is rejected") {
  CHECK_THROWS_AS(primitive_from_name("fused-attention"), UnsupportedPrimitive);
}

TEST_CASE("apply_primitive dispatches the catalog") {
  Rng rng(3);
  Tensor a = random_tensor(rng, {2, 3});
  Tensor b = random_tensor(rng, {3, 4});
  const Tensor via_enum = apply_primitive(Primitive::kMatmul, {a, b});
  const Tensor direct = matmul(a, b);
  CHECK(bit_equal(via_enum.data(), direct.data()));

  PrimitiveAttrs attrs;
  attrs.shape = {3, 2};
  const Tensor r = apply_primitive(Primitive::kReshape, {a}, attrs);
  CHECK(r.shape() == Shape{3, 2});
}

TEST_CASE("primitives are pure: identical inputs give bit-identical outputs") {
  Rng rng(11);
  Tensor x = random_tensor(rng, {2, 5, 5});
  Tensor k = random_tensor(rng, {3, 2, 3, 3});
  CHECK(bit_equal(conv2d(x, k).data(), conv2d(x, k).data()));
  Tensor m = random_tensor(rng, {7, 4});
  CHECK(bit_equal(max_over_points(m).data(), max_over_points(m).data()));
}

TEST_CASE("backward of a sum-like loss is all ones") {
  Rng rng(5);
  Tape tape;
  Tensor x = tape.leaf(random_tensor(rng, {4, 3}));
  // mean |x - far| with far << x has gradient 1/n everywhere; scale by n.
  Tensor far = Tensor::full({4, 3}, -100.0);
  Tensor loss = weighted_sum({l1_loss(x, far)}, {12.0});
  const GradientMap grads = tape.backward(loss);
  const Vec& g = grads.at(x);
  for (long i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0));
}

TEST_CASE("gradient of sigmoid at zero is a quarter") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(0.0));
  Tensor y = sigmoid(x);
  const GradientMap grads = tape.backward(y);
  CHECK(grads.at(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("bce of sigmoid-linear layer matches finite differences") {
  // loss = BCE(sigmoid(W x), target) for a random 4x4 W.
  Rng rng(7);
  const Tensor x = random_tensor(rng, {4, 4});
  const Tensor target = random_tensor(rng, {4, 4}, 0.2, 0.8);
  const auto f = [&](const std::vector<Tensor>& p) {
    return bce_loss(sigmoid(matmul(p[0], x)), target);
  };
  const Tensor w = random_tensor(rng, {4, 4});
  const FdReport report = finite_difference_check(f, {w}, 1e-6, 1e-4);
  CHECK(report.pass);
  CHECK(report.worst < 1e-4);
}

TEST_CASE("unused leaves receive zero gradients") {
  Tape tape;
  Tensor used = tape.leaf(Tensor::scalar(2.0));
  Tensor unused = tape.leaf(Tensor::zeros({3}));
  Tensor loss = sigmoid(used);
  const GradientMap grads = tape.backward(loss);
  CHECK(grads.at(unused).size() == 3);
  CHECK(grads.at(unused).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects non-scalar and detached losses") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::zeros({3}));
  Tensor y = relu(x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);

  Tensor plain = sigmoid(Tensor::scalar(0.0));
  CHECK_THROWS_AS(backward(plain), NoTapeError);
}

TEST_CASE("tape is single-use") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(1.0));
  Tensor loss = sigmoid(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("inputs from different tapes are rejected") {
  Tape t1, t2;
  Tensor a = t1.leaf(Tensor::zeros({2, 2}));
  Tensor b = t2.leaf(Tensor::zeros({2, 2}));
  CHECK_THROWS_AS(cmul(a, b), ContractError);
}

TEST_CASE("bce is finite for inputs exactly 0 and 1") {
  Tensor pred({4}, (Vec(4) << 0.0, 1.0, 0.0, 1.0).finished());
  Tensor target({4}, (Vec(4) << 0.0, 1.0, 1.0, 0.0).finished());
  const Tensor loss = bce_loss(pred, target);
  CHECK(std::isfinite(loss.value()));
  // Mismatched coordinates hit the clamp at -log(kBceEps); matched ones
  // contribute -log(1 - kBceEps) ~ kBceEps.
  CHECK(loss.value() == doctest::Approx(-std::log(kBceEps) / 2.0).epsilon(1e-6));
}

TEST_CASE("concat broadcasts vectors across rows") {
  Tensor a({2, 2}, (Vec(4) << 1, 2, 3, 4).finished());
  Tensor v({3}, (Vec(3) << 7, 8, 9).finished());
  const Tensor c = concat({a, v});
  CHECK(c.shape() == Shape{2, 5});
  CHECK(c.mat()(0, 2) == 7.0);
  CHECK(c.mat()(1, 4) == 9.0);
}

TEST_CASE("finite-difference checker flags non-determinism") {
  int calls = 0;
  const auto f = [&calls](const std::vector<Tensor>& p) {
    ++calls;
    return weighted_sum({l1_loss(p[0], Tensor::full(p[0].shape(), -10.0))},
                        {1.0 + 0.001 * calls});
  };
  CHECK_THROWS_AS(finite_difference_check(f, {Tensor::full({2}, 0.5)}, 1e-6, 1e-4),
                  DeterminismError);
}

TEST_CASE("finite-difference checker accepts a constant function") {
  const auto f = [](const std::vector<Tensor>& p) {
    return weighted_sum({l1_loss(p[0], p[0])}, {1.0});
  };
  // d/dp mean|p - p| is identically zero on both sides.
  const FdReport report = finite_difference_check(f, {Tensor::full({3}, 0.25)});
  CHECK(report.pass);
  CHECK(report.worst == 0.0);
}

TEST_CASE("conv and upsample losses pass finite differences") {
  Rng rng(19);
  const Tensor target = Tensor::full({3, 8, 8}, 2.0);
  const Tensor x0 = random_tensor(rng, {1, 8, 8});
  const Tensor k0 = random_tensor(rng, {3, 1, 3, 3});
  const auto f_conv = [&](const std::vector<Tensor>& p) {
    return l1_loss(conv2d(p[0], p[1]), target);
  };
  CHECK(finite_difference_check(f_conv, {x0, k0}, 1e-6, 1e-4).pass);

  const Tensor up_target = Tensor::full({1, 8, 8}, 2.0);
  const Tensor xu = random_tensor(rng, {1, 4, 4});
  const auto f_up = [&](const std::vector<Tensor>& p) {
    return l1_loss(upsample2x(p[0]), up_target);
  };
  CHECK(finite_difference_check(f_up, {xu}, 1e-6, 1e-4).pass);
}

TEST_CASE("adam: zero gradient is a fixed point") {
  Tensor p = Tensor::full({4}, 1.5);
  AdamState st(4, 0.1);
  adam_step(p, Vec::Zero(4), st);
  CHECK(p.data().isApproxToConstant(1.5, 0.0));
  CHECK(st.m.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.s.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.t == 1);
}

TEST_CASE("adam: first-step update matches the closed form") {
  Tensor p = Tensor::scalar(1.0);
  AdamState st(1, 0.001);
  adam_step(p, Vec::Ones(1), st);
  CHECK(p.value() == doctest::Approx(1.0 - 0.001 * (1.0 / (1.0 + 1e-8))).epsilon(1e-12));
}

TEST_CASE("adam converges on a scalar quadratic") {
  Tensor w = Tensor::scalar(0.0);
  AdamState st(1, 0.01);
  for (int i = 0; i < 5000; ++i) {
    const Vec grad = Vec::Constant(1, 2.0 * (w.value() - 3.0));
    adam_step(w, grad, st);
  }
  CHECK(std::abs(w.value() - 3.0) < 1e-2);
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  Tensor p = Tensor::zeros({4});
  AdamState st(4);
  CHECK_THROWS_AS(adam_step(p, Vec::Zero(3), st), ShapeError);
}

TEST_CASE("gradient suite passes across 20 seeds") {
  const SuiteReport report = run_gradient_suite(20);
  for (const auto& e : report.entries) {
    INFO(e.name, " max_rel_err=", e.max_rel_err);
    CHECK(e.pass);
  }
  CHECK(report.pass);
  CHECK(report.seconds < 300.0);
}
