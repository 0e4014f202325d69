#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/gradcheck.hpp"
#include "core/opcount.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using spmkd::Shape;
using spmkd::Tensor;
using spmkd::TensorD;
using spmkd::TensorF;
using testutil::random_tensor;

// ===========================================================================
// tensor basics
// ===========================================================================

TEST_CASE("tensor: construction and invariants") {
  auto t = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.shape() == Shape{2, 3});
  CHECK(t.all_finite());
  CHECK_THROWS_AS(TensorD::from({2, 2}, {1, 2, 3}), spmkd::DimensionError);
  CHECK_THROWS_AS(t.item(), spmkd::DimensionError);
  CHECK(TensorD::scalar(7.0).item() == 7.0);
}

TEST_CASE("tensor: backward requires scalar root with grads enabled") {
  auto x = TensorD::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(x.backward(), spmkd::DimensionError);
  auto frozen = spmkd::sum_all(TensorD::from({2}, {1, 2}, false));
  CHECK_THROWS_AS(frozen.backward(), spmkd::StateError);
}

TEST_CASE("tensor: grads accumulate across uses of the same node") {
  auto x = TensorD::scalar(3.0, true);
  auto y = spmkd::add(x, x);  // y = 2x
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
}

// ===========================================================================
// matmul vs. triple-loop oracle
// ===========================================================================

TEST_CASE("matmul: identity leaves operand unchanged") {
  auto eye = TensorD::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto b = TensorD::from({3, 2}, {1, 2, 3, 4, 5, 6});
  auto out = spmkd::matmul(eye, b);
  CHECK(out.values() == b.values());
}

TEST_CASE("matmul: hand-computed 2x2 product") {
  auto a = TensorD::from({2, 2}, {1, 2, 3, 4});
  auto b = TensorD::from({2, 2}, {5, 6, 7, 8});
  auto out = spmkd::matmul(a, b);
  CHECK(out.values() == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("matmul: random 4x5 x 5x3 matches oracle at 1e-9") {
  spmkd::Rng rng(11);
  auto a = random_tensor<double>(rng, {4, 5}, -2.0, 2.0);
  auto b = random_tensor<double>(rng, {5, 3}, -2.0, 2.0);
  auto out = spmkd::matmul(a, b);
  auto ref = oracle::matmul(a.values(), b.values(), 4, 5, 3);
  CHECK(testutil::max_abs_diff(out.values(), ref) < 1e-9);
}

TEST_CASE("matmul: random shapes match oracle, both precisions") {
  spmkd::Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = rng.uniform_int(1, 9), k = rng.uniform_int(1, 9), n = rng.uniform_int(1, 9);
    auto a64 = random_tensor<double>(rng, {m, k}, -1.5, 1.5);
    auto b64 = random_tensor<double>(rng, {k, n}, -1.5, 1.5);
    auto out64 = spmkd::matmul(a64, b64);
    CHECK(testutil::max_abs_diff(out64.values(), oracle::matmul(a64.values(), b64.values(), m, k, n)) < 1e-9);

    std::vector<float> af(a64.values().begin(), a64.values().end());
    std::vector<float> bf(b64.values().begin(), b64.values().end());
    auto out32 = spmkd::matmul(TensorF::from({m, k}, af), TensorF::from({k, n}, bf));
    CHECK(testutil::max_abs_diff(out32.values(), oracle::matmul(af, bf, m, k, n)) < 1e-6f);
  }
}

TEST_CASE("matmul: inner dimension mismatch throws") {
  auto a = TensorD::zeros({2, 3});
  auto b = TensorD::zeros({4, 2});
  CHECK_THROWS_AS(spmkd::matmul(a, b), spmkd::DimensionError);
}

TEST_CASE("matmul: gradients match finite differences") {
  spmkd::Rng rng(13);
  auto a = random_tensor<double>(rng, {3, 4}, -1.0, 1.0, true);
  auto b = random_tensor<double>(rng, {4, 2}, -1.0, 1.0, true);
  auto coef = random_tensor<double>(rng, {3, 2}, -1.0, 1.0);
  testutil::check_op_grads(
      [&] { return spmkd::sum_all(spmkd::mul(spmkd::matmul(a, b), coef)); },
      {{"a", a}, {"b", b}});
}

// ===========================================================================
// conv2d vs. naive six-loop oracle
// ===========================================================================

TEST_CASE("conv2d: all-ones 3x3 kernel on all-ones 3x3 input, pad 1") {
  auto x = TensorD::filled({1, 1, 3, 3}, 1.0);
  auto w = TensorD::filled({1, 1, 3, 3}, 1.0);
  auto out = spmkd::conv2d(x, w, TensorD(), 1, 1, 1);
  CHECK(out.shape() == Shape{1, 1, 3, 3});
  // Valid taps at the corners cover 4 pixels, edges 6, center all 9.
  CHECK(out.values() == std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4});
}

TEST_CASE("conv2d: dilation 2 sensitivity restricted to even offsets") {
  std::vector<double> hot(25, 0.0);
  hot[2 * 5 + 2] = 1.0;
  auto x = TensorD::from({1, 1, 5, 5}, hot);
  auto w = TensorD::filled({1, 1, 3, 3}, 1.0);
  auto out = spmkd::conv2d(x, w, TensorD(), 1, 2, 2);
  CHECK(out.shape() == Shape{1, 1, 5, 5});
  for (int oy = 0; oy < 5; ++oy) {
    for (int ox = 0; ox < 5; ++ox) {
      const bool reachable = (oy % 2 == 0) && (ox % 2 == 0);  // offsets from (2,2) in {0,±2}
      CHECK(out.values()[oy * 5 + ox] == (reachable ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("conv2d: random 1x2x8x8 matches oracle within 1e-6") {
  spmkd::Rng rng(21);
  auto x = random_tensor<float>(rng, {1, 2, 8, 8}, -1.0f, 1.0f);
  auto w = random_tensor<float>(rng, {3, 2, 3, 3}, -1.0f, 1.0f);
  auto b = random_tensor<float>(rng, {3}, -1.0f, 1.0f);
  auto out = spmkd::conv2d(x, w, b, 1, 1, 1);
  auto ref = oracle::conv2d(x.values(), 1, 2, 8, 8, w.values(), 3, 3, 3, &b.values(), 1, 1, 1);
  CHECK(testutil::max_abs_diff(out.values(), ref) < 1e-6f);
}

TEST_CASE("conv2d: random geometries match oracle, both precisions") {
  spmkd::Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = rng.uniform_int(1, 2), ci = rng.uniform_int(1, 4), co = rng.uniform_int(1, 4);
    const auto k = rng.uniform_int(1, 2) * 2 - 1;  // 1 or 3
    const auto stride = rng.uniform_int(1, 2), dil = rng.uniform_int(1, 2);
    const auto pad = rng.uniform_int(0, 2);
    const auto span = dil * (k - 1) + 1;
    const auto h = rng.uniform_int(span, span + 6), w = rng.uniform_int(span, span + 6);

    auto x = random_tensor<double>(rng, {n, ci, h, w}, -1.0, 1.0);
    auto wt = random_tensor<double>(rng, {co, ci, k, k}, -1.0, 1.0);
    auto b = random_tensor<double>(rng, {co}, -1.0, 1.0);
    auto out = spmkd::conv2d(x, wt, b, stride, pad, dil);
    auto ref = oracle::conv2d(x.values(), n, ci, h, w, wt.values(), co, k, k, &b.values(), stride, pad, dil);
    REQUIRE(out.values().size() == ref.size());
    CHECK(testutil::max_abs_diff(out.values(), ref) < 1e-9);

    std::vector<float> xf(x.values().begin(), x.values().end());
    std::vector<float> wf(wt.values().begin(), wt.values().end());
    std::vector<float> bf(b.values().begin(), b.values().end());
    auto out32 = spmkd::conv2d(TensorF::from(x.shape(), xf), TensorF::from(wt.shape(), wf),
                               TensorF::from({co}, bf), stride, pad, dil);
    auto ref32 = oracle::conv2d(xf, n, ci, h, w, wf, co, k, k, &bf, stride, pad, dil);
    CHECK(testutil::max_abs_diff(out32.values(), ref32) < 1e-6f);
  }
}

TEST_CASE("conv2d: output size formula and error paths") {
  auto w = TensorD::zeros({1, 1, 3, 3});
  CHECK(spmkd::conv2d(TensorD::zeros({1, 1, 7, 7}), w, TensorD(), 2, 1, 1).shape() == Shape{1, 1, 4, 4});
  CHECK(spmkd::conv2d(TensorD::zeros({1, 1, 8, 8}), w, TensorD(), 2, 1, 1).shape() == Shape{1, 1, 4, 4});
  CHECK(spmkd::conv2d(TensorD::zeros({1, 1, 9, 9}), w, TensorD(), 1, 3, 3).shape() == Shape{1, 1, 9, 9});
  // channel mismatch
  CHECK_THROWS_AS(spmkd::conv2d(TensorD::zeros({1, 2, 8, 8}), w, TensorD(), 1, 1, 1), spmkd::DimensionError);
  // too small for the dilated kernel
  CHECK_THROWS_AS(spmkd::conv2d(TensorD::zeros({1, 1, 2, 2}), w, TensorD(), 1, 0, 1), spmkd::DimensionError);
  // invalid hyperparameters
  CHECK_THROWS_AS(spmkd::conv2d(TensorD::zeros({1, 1, 8, 8}), w, TensorD(), 0, 1, 1), spmkd::ConfigError);
  // bias length
  CHECK_THROWS_AS(spmkd::conv2d(TensorD::zeros({1, 1, 8, 8}), w, TensorD::zeros({2}), 1, 1, 1),
                  spmkd::DimensionError);
}

TEST_CASE("conv2d: gradients match finite differences (incl. stride and dilation)") {
  spmkd::Rng rng(23);
  struct Geo {
    int stride, pad, dil;
  };
  for (Geo g : {Geo{1, 1, 1}, Geo{2, 1, 1}, Geo{1, 3, 3}, Geo{1, 0, 1}}) {
    auto x = random_tensor<double>(rng, {1, 2, 7, 7}, -1.0, 1.0, true);
    auto w = random_tensor<double>(rng, {2, 2, 3, 3}, -1.0, 1.0, true);
    auto b = random_tensor<double>(rng, {2}, -0.5, 0.5, true);
    auto out_shape = spmkd::conv2d(x, w, b, g.stride, g.pad, g.dil).shape();
    auto coef = random_tensor<double>(rng, out_shape, -1.0, 1.0);
    testutil::check_op_grads(
        [&] { return spmkd::sum_all(spmkd::mul(spmkd::conv2d(x, w, b, g.stride, g.pad, g.dil), coef)); },
        {{"x", x}, {"w", w}, {"b", b}});
  }
}

// ===========================================================================
// fully_connected
// ===========================================================================

TEST_CASE("fully_connected: zero weight returns broadcast bias") {
  auto x = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = TensorD::zeros({3, 2});
  auto b = TensorD::from({2}, {7, -1});
  auto out = spmkd::fully_connected(x, w, b);
  CHECK(out.values() == std::vector<double>{7, -1, 7, -1});
}

TEST_CASE("fully_connected: identity weight, zero bias is the identity") {
  auto x = TensorD::from({2, 2}, {1, 2, 3, 4});
  auto eye = TensorD::from({2, 2}, {1, 0, 0, 1});
  auto out = spmkd::fully_connected(x, eye, TensorD::zeros({2}));
  CHECK(out.values() == x.values());
}

TEST_CASE("fully_connected: equals matmul plus bias add exactly") {
  spmkd::Rng rng(31);
  auto x = random_tensor<double>(rng, {4, 6}, -1.0, 1.0);
  auto w = random_tensor<double>(rng, {6, 3}, -1.0, 1.0);
  auto b = random_tensor<double>(rng, {3}, -1.0, 1.0);
  auto fc = spmkd::fully_connected(x, w, b);
  auto composed = spmkd::matmul(x, w);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(fc.values()[r * 3 + c] == composed.values()[r * 3 + c] + b.values()[c]);
    }
  }
}

TEST_CASE("fully_connected: optional bias and gradients") {
  spmkd::Rng rng(32);
  auto x = random_tensor<double>(rng, {3, 5}, -1.0, 1.0, true);
  auto w = random_tensor<double>(rng, {5, 4}, -1.0, 1.0, true);
  auto b = random_tensor<double>(rng, {4}, -1.0, 1.0, true);
  auto coef = random_tensor<double>(rng, {3, 4}, -1.0, 1.0);
  testutil::check_op_grads(
      [&] { return spmkd::sum_all(spmkd::mul(spmkd::fully_connected(x, w, b), coef)); },
      {{"x", x}, {"w", w}, {"b", b}});
  // bias-free form
  auto no_bias = spmkd::fully_connected(x, w, TensorD());
  CHECK(no_bias.shape() == Shape{3, 4});
}

// ===========================================================================
// activations
// ===========================================================================

TEST_CASE("sigmoid: midpoint, range, gradient at zero") {
  // Strict range (0,1) holds while 1-sigmoid(x) stays above double epsilon;
  // beyond |x|~36 the value rounds to the boundary.
  auto x = TensorD::from({3}, {0.0, 20.0, -20.0}, true);
  auto y = spmkd::sigmoid(x);
  CHECK(y.values()[0] == 0.5);
  CHECK(y.values()[1] > 0.0);
  CHECK(y.values()[1] < 1.0);
  CHECK(y.values()[2] > 0.0);
  CHECK(y.values()[2] < 1.0);

  // d sigmoid/dx at 0 is 0.25; compare against a central difference, h=1e-5.
  auto x0 = TensorD::scalar(0.0, true);
  auto loss = [&] { return spmkd::sum_all(spmkd::sigmoid(x0)); };
  auto report = spmkd::grad_check<double>(loss, {{"x0", x0}}, 1e-5, 1e-9);
  CHECK(report.all_passed);
  x0.zero_grad();
  auto l = loss();
  l.backward();
  CHECK(x0.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("relu: forward and subgradient away from the kink") {
  auto x = TensorD::from({4}, {-2.0, -0.5, 0.5, 2.0}, true);
  auto y = spmkd::relu(x);
  CHECK(y.values() == std::vector<double>{0.0, 0.0, 0.5, 2.0});
  auto coef = TensorD::from({4}, {1, 2, 3, 4});
  testutil::check_op_grads([&] { return spmkd::sum_all(spmkd::mul(spmkd::relu(x), coef)); }, {{"x", x}});
}

TEST_CASE("softmax: constant slices go uniform; slices sum to one") {
  auto c = spmkd::softmax(TensorD::filled({2, 5}, 3.0), 1);
  for (double v : c.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

  spmkd::Rng rng(41);
  auto x = random_tensor<double>(rng, {3, 4, 2}, -3.0, 3.0);
  for (int axis = 0; axis < 3; ++axis) {
    auto y = spmkd::softmax(x, axis);
    const auto& s = y.shape();
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (int i = axis + 1; i < 3; ++i) inner *= s[i];
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        double sum = 0;
        for (std::int64_t j = 0; j < s[axis]; ++j) sum += y.values()[o * s[axis] * inner + j * inner + in];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
  CHECK_THROWS_AS(spmkd::softmax(x, 3), spmkd::DimensionError);
}

TEST_CASE("softmax_channel: picks the channel axis for 3D and 4D") {
  spmkd::Rng rng(42);
  auto x3 = random_tensor<double>(rng, {3, 2, 2}, -2.0, 2.0);
  auto y3 = spmkd::softmax_channel(x3);
  for (int p = 0; p < 4; ++p) {
    double sum = 0;
    for (int c = 0; c < 3; ++c) sum += y3.values()[c * 4 + p];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  auto x4 = random_tensor<double>(rng, {2, 3, 2, 2}, -2.0, 2.0);
  CHECK(spmkd::softmax_channel(x4).shape() == x4.shape());
  CHECK_THROWS_AS(spmkd::softmax_channel(random_tensor<double>(rng, {4}, 0.0, 1.0)), spmkd::DimensionError);
}

TEST_CASE("softmax: gradients match finite differences") {
  spmkd::Rng rng(43);
  auto x = random_tensor<double>(rng, {2, 5}, -2.0, 2.0, true);
  auto coef = random_tensor<double>(rng, {2, 5}, -1.0, 1.0);
  testutil::check_op_grads([&] { return spmkd::sum_all(spmkd::mul(spmkd::softmax(x, 1), coef)); }, {{"x", x}});
}

// ===========================================================================
// elementwise and reductions
// ===========================================================================

TEST_CASE("elementwise ops: forward values and shape guards") {
  auto a = TensorD::from({2, 2}, {1, 2, 3, 4});
  auto b = TensorD::from({2, 2}, {5, 6, 7, 8});
  CHECK(spmkd::add(a, b).values() == std::vector<double>{6, 8, 10, 12});
  CHECK(spmkd::sub(a, b).values() == std::vector<double>{-4, -4, -4, -4});
  CHECK(spmkd::mul(a, b).values() == std::vector<double>{5, 12, 21, 32});
  CHECK(spmkd::div(b, a).values() == std::vector<double>{5, 3, 7.0 / 3.0, 2});
  CHECK(spmkd::add_scalar(a, 1.0).values() == std::vector<double>{2, 3, 4, 5});
  CHECK(spmkd::mul_scalar(a, -2.0).values() == std::vector<double>{-2, -4, -6, -8});
  CHECK(spmkd::scalar_sub(1.0, a).values() == std::vector<double>{0, -1, -2, -3});
  CHECK_THROWS_AS(spmkd::add(a, TensorD::zeros({2, 3})), spmkd::DimensionError);
}

TEST_CASE("elementwise ops: gradients match finite differences") {
  spmkd::Rng rng(51);
  auto a = random_tensor<double>(rng, {2, 3}, 0.5, 2.0, true);
  auto b = random_tensor<double>(rng, {2, 3}, 0.5, 2.0, true);
  auto coef = random_tensor<double>(rng, {2, 3}, -1.0, 1.0);
  auto wrap = [&](auto op) {
    return [&, op] { return spmkd::sum_all(spmkd::mul(op(), coef)); };
  };
  testutil::check_op_grads(wrap([&] { return spmkd::add(a, b); }), {{"a", a}, {"b", b}});
  testutil::check_op_grads(wrap([&] { return spmkd::sub(a, b); }), {{"a", a}, {"b", b}});
  testutil::check_op_grads(wrap([&] { return spmkd::mul(a, b); }), {{"a", a}, {"b", b}});
  testutil::check_op_grads(wrap([&] { return spmkd::div(a, b); }), {{"a", a}, {"b", b}});
  testutil::check_op_grads(wrap([&] { return spmkd::add_scalar(a, 0.7); }), {{"a", a}});
  testutil::check_op_grads(wrap([&] { return spmkd::mul_scalar(a, -1.3); }), {{"a", a}});
  testutil::check_op_grads(wrap([&] { return spmkd::scalar_sub(2.0, a); }), {{"a", a}});
}

TEST_CASE("reductions: sum, mean, and their gradients") {
  auto x = TensorD::from({2, 2}, {1, 2, 3, 4}, true);
  CHECK(spmkd::sum_all(x).item() == 10.0);
  CHECK(spmkd::mean_all(x).item() == 2.5);
  auto m = spmkd::mean_all(x);
  m.backward();
  for (double g : x.grad()) CHECK(g == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("normalize_rows: unit row sums and gradients") {
  spmkd::Rng rng(52);
  auto x = random_tensor<double>(rng, {3, 6}, 0.1, 2.0, true);
  auto y = spmkd::normalize_rows(x);
  for (int r = 0; r < 3; ++r) {
    double sum = 0;
    for (int c = 0; c < 6; ++c) sum += y.values()[r * 6 + c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto coef = random_tensor<double>(rng, {3, 6}, -1.0, 1.0);
  testutil::check_op_grads([&] { return spmkd::sum_all(spmkd::mul(spmkd::normalize_rows(x), coef)); },
                           {{"x", x}});
  CHECK_THROWS_AS(spmkd::normalize_rows(TensorD::zeros({2, 2, 2})), spmkd::DimensionError);
}

// ===========================================================================
// upsample_bilinear
// ===========================================================================

TEST_CASE("upsample_bilinear: constants stay constant, scale 1 is identity") {
  auto c = TensorD::filled({1, 2, 3, 3}, 3.0);
  auto up = spmkd::upsample_bilinear(c, 2);
  CHECK(up.shape() == Shape{1, 2, 6, 6});
  for (double v : up.values()) CHECK(v == 3.0);
  auto same = spmkd::upsample_bilinear(c, 1);
  CHECK(same.values() == c.values());
  CHECK_THROWS_AS(spmkd::upsample_bilinear(c, 0), spmkd::ConfigError);
  CHECK_THROWS_AS(spmkd::upsample_bilinear(TensorD::zeros({3, 3}), 2), spmkd::DimensionError);
}

TEST_CASE("upsample_bilinear: 2x2 ramp doubled matches hand-computed taps") {
  auto x = TensorD::from({1, 1, 2, 2}, {0, 1, 2, 3});
  auto up = spmkd::upsample_bilinear(x, 2);
  // Half-pixel mapping: 1-D tap weights (1,0), (.75,.25), (.25,.75), (0,1).
  const std::vector<double> expected = {
      0.0, 0.25, 0.75, 1.0,
      0.5, 0.75, 1.25, 1.5,
      1.5, 1.75, 2.25, 2.5,
      2.0, 2.25, 2.75, 3.0,
  };
  CHECK(testutil::max_abs_diff(up.values(), expected) < 1e-6);
}

TEST_CASE("upsample_bilinear: gradients match finite differences") {
  spmkd::Rng rng(61);
  auto x = random_tensor<double>(rng, {1, 2, 3, 3}, -1.0, 1.0, true);
  auto coef = random_tensor<double>(rng, {1, 2, 9, 9}, -1.0, 1.0);
  testutil::check_op_grads([&] { return spmkd::sum_all(spmkd::mul(spmkd::upsample_bilinear(x, 3), coef)); },
                           {{"x", x}});
}

// ===========================================================================
// concat / reshape
// ===========================================================================

TEST_CASE("concat: shape algebra") {
  CHECK(spmkd::concat(TensorD::zeros({2, 3}), TensorD::zeros({2, 5}), 1).shape() == Shape{2, 8});
  CHECK(spmkd::concat(TensorD::zeros({2, 3}), TensorD::zeros({4, 3}), 0).shape() == Shape{6, 3});
  CHECK(spmkd::concat(TensorD::zeros({2, 1, 4}), TensorD::zeros({2, 3, 4}), 1).shape() == Shape{2, 4, 4});
  CHECK_THROWS_AS(spmkd::concat(TensorD::zeros({2, 3}), TensorD::zeros({3, 5}), 1), spmkd::DimensionError);
}

TEST_CASE("concat: values interleave by axis and gradients split back") {
  auto a = TensorD::from({2, 2}, {1, 2, 3, 4}, true);
  auto b = TensorD::from({2, 1}, {9, 8}, true);
  auto y = spmkd::concat(a, b, 1);
  CHECK(y.values() == std::vector<double>{1, 2, 9, 3, 4, 8});
  spmkd::Rng rng(71);
  auto coef = random_tensor<double>(rng, {2, 3}, -1.0, 1.0);
  testutil::check_op_grads([&] { return spmkd::sum_all(spmkd::mul(spmkd::concat(a, b, 1), coef)); },
                           {{"a", a}, {"b", b}});
}

TEST_CASE("reshape: view semantics and gradient passthrough") {
  auto x = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto y = spmkd::reshape(x, {3, 2});
  CHECK(y.values() == x.values());
  CHECK_THROWS_AS(spmkd::reshape(x, {4, 2}), spmkd::DimensionError);
  auto l = spmkd::sum_all(spmkd::mul(spmkd::reshape(x, {6}), TensorD::from({6}, {1, 2, 3, 4, 5, 6})));
  l.backward();
  CHECK(x.grad() == std::vector<double>{1, 2, 3, 4, 5, 6});
}

// ===========================================================================
// grad_check itself
// ===========================================================================

TEST_CASE("grad_check: x squared at x=3 gives derivative 6 within 1e-8") {
  auto x = TensorD::scalar(3.0, true);
  auto report = spmkd::grad_check<double>([&] { return spmkd::sum_all(spmkd::mul(x, x)); }, {{"x", x}},
                                          1e-5, 1e-8);
  CHECK(report.all_passed);
  CHECK(report.entries[0].nonzero);
  CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("grad_check: single conv layer plus L2-style loss under 1e-6") {
  spmkd::Rng rng(81);
  auto x = random_tensor<double>(rng, {1, 1, 5, 5}, -1.0, 1.0);
  auto w = random_tensor<double>(rng, {2, 1, 3, 3}, -1.0, 1.0, true);
  auto b = random_tensor<double>(rng, {2}, -0.2, 0.2, true);
  auto target = random_tensor<double>(rng, {1, 2, 5, 5}, -1.0, 1.0);
  auto loss = [&] {
    auto d = spmkd::sub(spmkd::conv2d(x, w, b, 1, 1, 1), target);
    return spmkd::mean_all(spmkd::mul(d, d));
  };
  auto report = spmkd::grad_check<double>(loss, {{"w", w}, {"b", b}}, 1e-5, 1e-6);
  CHECK(report.all_passed);
  CHECK(report.all_nonzero);
}

TEST_CASE("grad_check: rejects non-finite losses") {
  auto x = TensorD::scalar(0.0, true);
  auto bad = [&] { return spmkd::sum_all(spmkd::div(TensorD::scalar(1.0), x)); };
  CHECK_THROWS_AS(spmkd::grad_check<double>(bad, {{"x", x}}, 1e-5, 1e-6), spmkd::NumericError);
}

// ===========================================================================
// count_ops
// ===========================================================================

TEST_CASE("count_ops: closed-form layer counts") {
  // conv 3x3, 1->8 channels on 64x64 output, with bias
  auto conv = spmkd::opcount::conv2d(1, 8, 3, 3, 64, 64);
  CHECK(conv.params == 80);
  CHECK(conv.flops == 2 * 8 * 9 * 64 * 64 + 8 * 64 * 64);
  // fully connected 100->50
  auto fc = spmkd::opcount::fully_connected(100, 50);
  CHECK(fc.params == 5050);
}

TEST_CASE("count_ops: additive over layers and stable across calls") {
  spmkd::ModelDesc desc = {
      {"m.conv1", "conv 1->8", spmkd::opcount::conv2d(1, 8, 3, 3, 64, 64)},
      {"m.conv2", "conv 8->4", spmkd::opcount::conv2d(8, 4, 3, 3, 64, 64)},
      {"other.fc", "fc 100->50", spmkd::opcount::fully_connected(100, 50)},
  };
  auto total = spmkd::count_ops(desc);
  CHECK(total.params == desc[0].count.params + desc[1].count.params + desc[2].count.params);
  CHECK(total.flops == desc[0].count.flops + desc[1].count.flops + desc[2].count.flops);
  CHECK(spmkd::count_ops(desc) == total);
  auto sub = spmkd::count_ops_prefix(desc, "m.");
  CHECK(sub.params == desc[0].count.params + desc[1].count.params);
  CHECK_THROWS_AS(spmkd::opcount::conv2d(0, 8, 3, 3, 64, 64), spmkd::ConfigError);
}

// ===========================================================================
// rng determinism
// ===========================================================================

TEST_CASE("rng: identical seeds give identical streams, mix_seed separates") {
  spmkd::Rng a(123), b(123), c(124);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
    CHECK(va == vb);
    any_diff = any_diff || (va != vc);
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  CHECK(any_diff);
  CHECK(spmkd::mix_seed(1, 2) != spmkd::mix_seed(1, 3));
  CHECK(spmkd::mix_seed(1, 2) != spmkd::mix_seed(2, 2));
  spmkd::Rng g(7);
  double mean = 0;
  for (int i = 0; i < 4000; ++i) mean += g.normal();
  mean /= 4000;
  CHECK(std::abs(mean) < 0.1);
}
