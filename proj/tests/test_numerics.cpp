#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hashtag/error.hpp"
#include "hashtag/ops.hpp"
#include "hashtag/optimizer.hpp"
#include "hashtag/rng.hpp"
#include "hashtag/tensor.hpp"

namespace hashtag {
namespace {

TEST(Rng, DeterministicPerSeed) {
  Rng a(5), b(5), c(6);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(Rng, IndexAndUniformRanges) {
  Rng r(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hits[r.index(7)];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(2);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Fnv1a, KnownVector) {
  static_assert(fnv1a64("") == 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Tensor, ShapeAndAccess) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  t.at(1, 2) = 4.0;
  EXPECT_EQ(t[5], 4.0);
  EXPECT_THROW(Tensor({0, 3}), std::invalid_argument);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Tensor, Kernels) {
  const Tensor w({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  std::vector<double> out(2, 1.0);
  const std::vector<double> x = {1, 0, -1};
  matvec_acc(w, x, out);
  EXPECT_EQ(out, (std::vector<double>{-1.0, -1.0}));
  std::vector<double> back(3, 0.0);
  const std::vector<double> y = {1, 1};
  matvec_t_acc(w, y, back);
  EXPECT_EQ(back, (std::vector<double>{5, 7, 9}));
  Tensor g({2, 3});
  outer_acc(g, y, x);
  EXPECT_EQ(g.values(), (std::vector<double>{1, 0, -1, 1, 0, -1}));
}

TEST(ParameterSet, NamesAreUnique) {
  ParameterSet p;
  const auto i = p.add("w", {2, 2});
  EXPECT_EQ(p[i].grad.size(), 4u);
  EXPECT_THROW(p.add("w", {1}), std::invalid_argument);
  EXPECT_TRUE(p.contains("w"));
  EXPECT_EQ(p.scalar_count(), 4u);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  std::vector<double> a = {1000.0, 1001.0, 999.0};
  std::vector<double> b = {0.0, 1.0, -1.0};
  softmax_inplace(a);
  softmax_inplace(b);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  EXPECT_NEAR(a[0] + a[1] + a[2], 1.0, 1e-15);
}

TEST(Softmax, MaskedPositionsGetExactZero) {
  std::vector<double> v = {3.0, 1.0, 2.0};
  const std::vector<std::uint8_t> keep = {1, 0, 1};
  masked_softmax_inplace(v, keep);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_NEAR(v[0] + v[2], 1.0, 1e-15);
  std::vector<double> w = {1.0, 2.0};
  const std::vector<std::uint8_t> none = {0, 0};
  EXPECT_THROW(masked_softmax_inplace(w, none), std::invalid_argument);
}

TEST(CrossEntropy, UniformLogits) {
  const std::vector<double> logits(4, 0.0);
  const auto ce = softmax_cross_entropy(logits, 2);
  EXPECT_NEAR(ce.loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(ce.grad_logits[2], 0.25 - 1.0, 1e-15);
  EXPECT_NEAR(ce.grad_logits[0], 0.25, 1e-15);
  EXPECT_THROW(softmax_cross_entropy(logits, 4), std::out_of_range);
}

TEST(Gelu, KnownValues) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    const double h = 1e-6;
    EXPECT_NEAR(gelu_grad(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
}

TEST(LstmCell, ZeroWeightsGiveHalfGates) {
  const Tensor wx({8, 3}), wh({8, 2}), b({8});
  const LstmWeights w{wx, wh, b};
  const Tensor x({3}, 1.0), h({2}), c({2}, 2.0);
  const auto [h1, c1] = lstm_cell(x, h, c, w);
  // i = f = o = 0.5, g = 0: c' = 0.5 * c, h' = 0.5 * tanh(c').
  EXPECT_NEAR(c1[0], 1.0, 1e-15);
  EXPECT_NEAR(h1[0], 0.5 * std::tanh(1.0), 1e-15);
}

TEST(LstmCell, ShapeMismatchThrows) {
  const Tensor wx({8, 3}), wh({8, 2}), b({8});
  const LstmWeights w{wx, wh, b};
  EXPECT_THROW(lstm_cell(Tensor({4}), Tensor({2}), Tensor({2}), w), std::invalid_argument);
}

TEST(LayerNorm, NormalizesRows) {
  const std::vector<double> x = {1, 2, 3, 4, 10, 10, 10, 10};
  Tensor gamma({4}, 1.0), beta({4});
  LayerNormCache cache;
  std::vector<double> y(8);
  layer_norm_forward(x, 2, 4, gamma, beta, cache, y);
  double mean = 0, var = 0;
  for (int i = 0; i < 4; ++i) mean += y[i] / 4;
  for (int i = 0; i < 4; ++i) var += (y[i] - mean) * (y[i] - mean) / 4;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.25 / (1.25 + kLayerNormEps), 1e-9);
  for (int i = 4; i < 8; ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet p;
  const auto i = p.add("w", {3});
  p[i].grad = Tensor({3}, std::vector<double>{0.5, -2.0, 0.0});
  AdamOptimizer opt(AdamConfig{0.1});
  opt.step(p);
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[i].value[0], -0.1, 1e-7);
  EXPECT_NEAR(p[i].value[1], 0.1, 1e-7);
  EXPECT_EQ(p[i].value[2], 0.0);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  ParameterSet p;
  const auto i = p.add("w", {4});
  Rng rng(1);
  init_uniform(p[i].value, 1.0, rng);
  const Tensor before = p[i].value;
  AdamOptimizer opt(AdamConfig{0.0});
  for (int s = 0; s < 3; ++s) {
    init_uniform(p[i].grad, 1.0, rng);
    opt.step(p);
  }
  EXPECT_EQ(p[i].value, before);
}

TEST(Adam, NonFiniteGradientRejectedBeforeUpdate) {
  ParameterSet p;
  const auto i = p.add("w", {2});
  p[i].grad[0] = 1.0;
  p[i].grad[1] = std::nan("");
  AdamOptimizer opt;
  EXPECT_THROW(opt.step(p), NumericError);
  EXPECT_EQ(p[i].value[0], 0.0);
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(Adam, MinimizesQuadratic) {
  ParameterSet p;
  const auto i = p.add("w", {2});
  p[i].value[0] = 3.0;
  p[i].value[1] = -2.0;
  AdamOptimizer opt(AdamConfig{0.05});
  for (int s = 0; s < 2000; ++s) {
    p.zero_grad();
    for (int k = 0; k < 2; ++k) p[i].grad[k] = 2.0 * (p[i].value[k] - 1.0);
    opt.step(p);
  }
  EXPECT_NEAR(p[i].value[0], 1.0, 1e-3);
  EXPECT_NEAR(p[i].value[1], 1.0, 1e-3);
}

}  // namespace
}  // namespace hashtag
