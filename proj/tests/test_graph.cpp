// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdanet/graph.hpp"
#include "testutil.hpp"

using namespace pdanet;
using testutil::check_param_grads;

namespace {

Param make_param(const std::string& name, Shape shape, Rng& rng, double stddev = 0.5) {
  Param p;
  p.name = name;
  p.value = Tensor::randn(std::move(shape), rng, stddev);
  p.grad = Tensor::zeros(p.value.shape);
  return p;
}

}  // namespace

TEST_CASE("elementwise ops forward values") {
  Graph g;
  Node* a = g.constant(Tensor::full({2, 2}, 3.0));
  Node* b = g.constant(Tensor::full({2, 2}, -1.0));
  CHECK(add(a, b)->val.data[0] == doctest::Approx(2.0));
  CHECK(sub(a, b)->val.data[0] == doctest::Approx(4.0));
  CHECK(mul(a, b)->val.data[0] == doctest::Approx(-3.0));
  CHECK(affine(a, 2.0, 1.0)->val.data[0] == doctest::Approx(7.0));
  CHECK(relu(b)->val.data[0] == doctest::Approx(0.0));
  CHECK(leaky_relu(b, 0.1)->val.data[0] == doctest::Approx(-0.1));
  CHECK(sigmoid_op(g.constant(Tensor::full({1}, 0.0)))->val.data[0] == doctest::Approx(0.5));
  CHECK(mean_all(a)->val.data[0] == doctest::Approx(3.0));
}

TEST_CASE("shape checks throw invalid_argument") {
  Graph g;
  Node* a = g.constant(Tensor::zeros({2, 3}));
  Node* b = g.constant(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(l1_mean(a, b), std::invalid_argument);
  CHECK_THROWS_AS(reshape(a, {5}), std::invalid_argument);
}

TEST_CASE("gradients of dense and conv ops match finite differences") {
  Rng rng(11);
  Rng pick(17);

  Param w = make_param("w", {5, 7}, rng);
  Param b = make_param("b", {5}, rng);
  Param x = make_param("x", {3, 7}, rng);
  auto build_linear = [&](Graph& g) {
    Node* y = linear(g.param(&x), g.param(&w), g.param(&b));
    return mean_all(mul(y, y));
  };
  auto rep = check_param_grads(build_linear, {&w, &b, &x}, 6, pick);
  CHECK(rep.max_rel_err < 1e-5);

  Param cw = make_param("cw", {4, 3, 3, 3}, rng);
  Param cb = make_param("cb", {4}, rng);
  Param cx = make_param("cx", {2, 3, 6, 4}, rng);
  auto build_conv = [&](Graph& g) {
    Node* y = conv2d(g.param(&cx), g.param(&cw), g.param(&cb), 2, 1);
    return mean_all(mul(y, y));
  };
  rep = check_param_grads(build_conv, {&cw, &cb, &cx}, 8, pick);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("gradients of normalization, pooling and resampling ops") {
  Rng rng(5);
  Rng pick(29);

  Param x = make_param("x", {2, 3, 4, 4}, rng);
  Param gamma = make_param("gamma", {3}, rng, 0.2);
  Param beta = make_param("beta", {3}, rng, 0.2);
  for (double& v : gamma.value.data) v += 1.0;
  auto build_in = [&](Graph& g) {
    Node* y = instance_norm(g.param(&x), g.param(&gamma), g.param(&beta));
    return mean_all(mul(y, y));
  };
  auto rep = check_param_grads(build_in, {&x, &gamma, &beta}, 8, pick);
  CHECK(rep.max_rel_err < 1e-4);

  auto build_pool = [&](Graph& g) {
    Node* y = avg_pool2(g.param(&x));
    y = upsample_nearest2(y);
    return mean_all(mul(y, y));
  };
  rep = check_param_grads(build_pool, {&x}, 8, pick);
  CHECK(rep.max_rel_err < 1e-5);

  Param xs = make_param("xs", {2, 8, 3, 2}, rng);
  auto build_shuffle = [&](Graph& g) {
    Node* y = pixel_shuffle2(g.param(&xs));
    return mean_all(mul(y, y));
  };
  rep = check_param_grads(build_shuffle, {&xs}, 8, pick);
  CHECK(rep.max_rel_err < 1e-5);

  auto build_misc = [&](Graph& g) {
    Node* t = tanh_op(g.param(&x));
    Node* s = sigmoid_op(g.param(&x));
    Node* sum = add(mean_all(t), mean_all(log_clamped(s)));
    Node* gap = global_avg_pool(g.param(&x));
    return add(sum, mean_all(mul(gap, gap)));
  };
  rep = check_param_grads(build_misc, {&x}, 10, pick);
  CHECK(rep.max_rel_err < 1e-5);

  Param v = make_param("v", {3, 4}, rng);
  auto build_bcast = [&](Graph& g) {
    Node* y = broadcast_spatial(g.param(&v), 3, 2);
    Node* m = spatial_mean(y);
    return mean_all(mul(m, m));
  };
  rep = check_param_grads(build_bcast, {&v}, 6, pick);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("concat and row-norm gradients") {
  Rng rng(7);
  Rng pick(31);
  Param a = make_param("a", {3, 4}, rng);
  Param b = make_param("b", {3, 2}, rng);
  auto build_cols = [&](Graph& g) {
    Node* y = concat_cols(g.param(&a), g.param(&b));
    return mean_all(mul(y, y));
  };
  auto rep = check_param_grads(build_cols, {&a, &b}, 6, pick);
  CHECK(rep.max_rel_err < 1e-5);

  Param i1 = make_param("i1", {2, 2, 3, 3}, rng);
  Param i2 = make_param("i2", {2, 1, 3, 3}, rng);
  auto build_ch = [&](Graph& g) {
    Node* y = concat_channels(g.param(&i1), g.param(&i2));
    return mean_all(mul(y, y));
  };
  rep = check_param_grads(build_ch, {&i1, &i2}, 6, pick);
  CHECK(rep.max_rel_err < 1e-5);

  Param p = make_param("p", {4, 3}, rng);
  Param q = make_param("q", {4, 3}, rng);
  auto build_norm = [&](Graph& g) {
    Node* n = row_l2_diff(g.param(&p), g.param(&q));
    return mean_all(n);
  };
  rep = check_param_grads(build_norm, {&p, &q}, 8, pick);
  CHECK(rep.max_rel_err < 1e-5);

  auto build_l1 = [&](Graph& g) { return l1_mean(g.param(&p), g.param(&q)); };
  rep = check_param_grads(build_l1, {&p, &q}, 8, pick);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("backward accumulates into shared subgraphs") {
  // f(x) = sum(x*x) used twice must double the gradient.
  Rng rng(3);
  Param x = make_param("x", {4}, rng);
  Graph g;
  Node* xn = g.param(&x);
  Node* sq = mul(xn, xn);
  Node* loss = add(mean_all(sq), mean_all(sq));
  x.grad.fill(0.0);
  g.backward(loss);
  for (int i = 0; i < 4; ++i)
    CHECK(x.grad.data[i] == doctest::Approx(2.0 * 2.0 * x.value.data[i] / 4.0));
}

TEST_CASE("two backward passes on one graph after zero_node_grads") {
  Rng rng(9);
  Param x = make_param("x", {3}, rng);
  Graph g;
  Node* xn = g.param(&x);
  Node* l1 = mean_all(mul(xn, xn));
  Node* l2 = mean_all(xn);
  x.grad.fill(0.0);
  g.backward(l1);
  Tensor g1 = x.grad;
  g.zero_node_grads();
  x.grad.fill(0.0);
  g.backward(l2);
  for (int i = 0; i < 3; ++i) {
    CHECK(g1.data[i] == doctest::Approx(2.0 * x.value.data[i] / 3.0));
    CHECK(x.grad.data[i] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("adam step and gradient clipping") {
  Param p;
  p.name = "p";
  p.value = Tensor::full({4}, 1.0);
  p.grad = Tensor::full({4}, 10.0);
  std::vector<Param*> ps = {&p};
  CHECK(clip_global_norm(ps, 5.0));
  CHECK(std::sqrt(4.0 * p.grad.data[0] * p.grad.data[0]) == doctest::Approx(5.0));

  AdamState st;
  st.beta1 = 0.9;
  st.beta2 = 0.999;
  double before = p.value.data[0];
  adam_step(st, ps, 1e-2);
  CHECK(p.value.data[0] < before);
  CHECK(st.t == 1);
}
