#include <cmath>

#include "doctest.h"
#include "dmssn/error.hpp"
#include "dmssn/nn.hpp"
#include "dmssn/ops.hpp"
#include "test_support.hpp"

using namespace dmssn;
using testing::Rng;
using testing::random_tensor;

namespace {

Var sum_weighted(const Var& x, const Tensor& w) {
  // scalar <x, w> built from ops so grad checks can close the graph
  const Tensor& xv = x.value();
  double s = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i] * w[i];
  return make_node(Tensor::scalar(s), {x}, [x, w](Node& n) mutable {
    Tensor& g = x.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad.item() * w[i];
  });
}

}  // namespace

TEST_CASE("linear matches the per-position oracle") {
  Rng rng(1);
  Tensor x = random_tensor({3, 4, 5}, rng), w = random_tensor({6, 5}, rng), b = random_tensor({6}, rng);
  Var y = ops::linear(constant(x), constant(w), constant(b));
  CHECK(testing::max_abs_diff(y.value(), testing::naive_linear(x, w, b)) < 1e-12);
}

TEST_CASE("conv2d matches the naive convolution for several strides and paddings") {
  Rng rng(2);
  for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, std::tuple{2, 2, 0}, std::tuple{4, 4, 0}, std::tuple{3, 2, 1}}) {
    Tensor x = random_tensor({8, 8, 3}, rng), w = random_tensor({4, k, k, 3}, rng), b = random_tensor({4}, rng);
    Var y = ops::conv2d(constant(x), constant(w), constant(b), stride, pad);
    CHECK(testing::max_abs_diff(y.value(), testing::naive_conv(x, w, b, stride, pad)) < 1e-12);
  }
}

TEST_CASE("shared spatial conv, layer norm, gelu, concat, resize match oracles") {
  Rng rng(3);
  Tensor x = random_tensor({5, 6, 4}, rng);
  Tensor k = random_tensor({3, 3}, rng);
  Var s = ops::shared_spatial_conv(constant(x), constant(k), constant(Tensor::scalar(0.25)), 1);
  CHECK(testing::max_abs_diff(s.value(), testing::naive_shared_conv(x, k, 0.25)) < 1e-12);

  Tensor g = random_tensor({4}, rng), b = random_tensor({4}, rng);
  Var ln = ops::layer_norm(constant(x), constant(g), constant(b));
  CHECK(testing::max_abs_diff(ln.value(), testing::naive_layer_norm(x, g, b)) < 1e-12);

  CHECK(testing::max_abs_diff(ops::gelu(constant(x)).value(), testing::naive_gelu(x)) < 1e-12);

  Tensor x2 = random_tensor({5, 6, 2}, rng);
  CHECK(testing::max_abs_diff(ops::concat_channels(constant(x), constant(x2)).value(), testing::naive_concat(x, x2)) ==
        0.0);

  for (auto [oh, ow] : {std::pair{10, 12}, std::pair{3, 3}, std::pair{5, 6}, std::pair{1, 1}}) {
    CHECK(testing::max_abs_diff(ops::resize_bilinear(x, oh, ow), testing::naive_resize(x, oh, ow)) < 1e-12);
  }
}

TEST_CASE("attention matches the brute-force oracle and rows are normalized") {
  Rng rng(4);
  Tensor q = random_tensor({3, 2, 8}, rng), k = random_tensor({2, 2, 8}, rng), v = random_tensor({2, 2, 8}, rng);
  for (int heads : {1, 2, 4}) {
    Var a = ops::attention(constant(q), constant(k), constant(v), heads);
    CHECK(testing::max_abs_diff(a.value(), testing::naive_attention(q, k, v, heads)) < 1e-12);
    Tensor w = ops::attention_weights(q, k, heads);
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < 6; ++i) {
        double s = 0;
        for (int j = 0; j < 4; ++j) s += w[static_cast<std::size_t>((h * 6 + i) * 4 + j)];
        CHECK(std::abs(s - 1) < 1e-12);
      }
  }
  CHECK_THROWS_AS(ops::attention(constant(q), constant(k), constant(v), 3), ShapeError);
}

TEST_CASE("every op's gradient agrees with central differences") {
  Rng rng(5);
  NamedParams p = {
      {"x", parameter(random_tensor({4, 4, 3}, rng))},
      {"w", parameter(random_tensor({6, 3}, rng))},
      {"b", parameter(random_tensor({6}, rng))},
      {"k", parameter(random_tensor({3, 3}, rng))},
      {"kb", parameter(random_tensor({1}, rng))},
      {"g", parameter(random_tensor({6}, rng))},
      {"beta", parameter(random_tensor({6}, rng))},
      {"cw", parameter(random_tensor({6, 2, 2, 6}, rng, -0.5, 0.5))},
      {"cb", parameter(random_tensor({6}, rng))},
  };
  auto get = [&](const char* n) {
    for (auto& [name, v] : p)
      if (name == n) return v;
    throw std::runtime_error(n);
  };
  const Tensor probe2 = random_tensor({4, 4, 6}, rng);
  const Tensor probe3 = random_tensor({4, 4, 12}, rng);
  auto loss = [&]() {
    Var y = ops::linear(get("x"), get("w"), get("b"));
    y = ops::shared_spatial_conv(y, get("k"), get("kb"), 1);
    y = ops::gelu(y);
    y = ops::layer_norm(y, get("g"), get("beta"));
    Var c = ops::conv2d(y, get("cw"), get("cb"), 2, 0);      // 2x2
    Var up = ops::resize_bilinear(c, 4, 4);                     // back to 4x4
    Var a = ops::attention(y, c, c, 2);
    Var z = ops::add(ops::scale(a, 0.5), ops::sigmoid(up));
    Var cat = ops::concat_channels(z, y);
    Var sl = ops::slice_channels(cat, 3, 6);
    return ops::add(sum_weighted(cat, probe3), sum_weighted(ops::add(sl, z), probe2));
  };
  auto report = testing::check_gradients(p, loss, rng, 4);
  INFO(report.worst);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.groups == 9);
}

TEST_CASE("frozen inputs record no tape") {
  Tensor x({2, 2, 2}, 1.0);
  Var y = ops::gelu(constant(x));
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->inputs.empty());
  CHECK_FALSE(static_cast<bool>(y.node()->backward));
}

TEST_CASE("backward accumulates into leaves and clears interior gradients") {
  Var x = parameter(Tensor({1, 1, 1}, 2.0));
  Tensor w({1}, 3.0);
  Var mid = ops::scale(x, 2.0);
  Var out = sum_weighted(mid, w);
  backward(out);
  CHECK(x.grad().item() == doctest::Approx(6.0));
  CHECK(mid.grad().empty());
  backward(out);
  CHECK(x.grad().item() == doctest::Approx(12.0));
}

TEST_CASE("shape errors are reported") {
  Rng rng(6);
  Tensor x = random_tensor({2, 2, 3}, rng);
  CHECK_THROWS_AS(ops::linear(constant(x), constant(random_tensor({4, 2}, rng)), Var()), ShapeError);
  CHECK_THROWS_AS(ops::add(constant(x), constant(random_tensor({2, 2, 2}, rng))), ShapeError);
}
