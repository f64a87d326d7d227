#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drx/tensor.hpp"
#include "test_util.hpp"

using namespace drx;
using drx::testing::random_tensor;
using drx::testing::weighted_readout;

namespace {

using TD = Tensor<double>;

double check(const std::function<TD()>& f, std::vector<TD> inputs) {
  return finite_diff_check<double>(f, std::move(inputs)).max_rel_error;
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(TD::from({2, 2}, {1, 2, 3}), ShapeError);
  auto t = TD::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
}

TEST(Conv2d, IdentityKernelIsIdentity) {
  auto x = TD::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto k = TD::from({1, 1, 1, 1}, {1});
  auto y = conv2d(x, k, 1, Padding::valid);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, StrideTwoSameShape) {
  auto x = TD::zeros({1, 3, 64, 64});
  auto k = TD::zeros({8, 3, 3, 3});
  EXPECT_EQ(conv2d(x, k, 2, Padding::same).shape(), (Shape{1, 8, 32, 32}));
}

TEST(Conv2d, OutputShapeFollowsFormula) {
  for (std::size_t h : {5u, 6u, 7u, 12u, 13u})
    for (std::size_t kh : {1u, 3u, 5u})
      for (std::size_t s : {1u, 2u, 3u})
        for (auto pad : {Padding::same, Padding::valid}) {
          if (kh > h) continue;
          auto g = conv_geometry(h, h, kh, kh, s, pad);
          EXPECT_EQ(g.out_h, (h + g.pad_h - kh) / s + 1);
          if (pad == Padding::same) EXPECT_EQ(g.out_h, (h + s - 1) / s);
          auto y = conv2d(TD::zeros({1, 1, h, h}), TD::zeros({2, 1, kh, kh}), s, pad);
          EXPECT_EQ(y.dim(2), g.out_h);
          EXPECT_EQ(y.dim(3), g.out_w);
        }
}

TEST(Conv2d, ChannelMismatchThrows) {
  EXPECT_THROW(conv2d(TD::zeros({1, 3, 5, 5}), TD::zeros({2, 2, 3, 3})), ShapeError);
  EXPECT_THROW(conv2d(TD::zeros({1, 1, 2, 2}), TD::zeros({1, 1, 3, 3}), 1, Padding::valid), ShapeError);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({1, 2, 5, 5}, rng);
  auto k = random_tensor({2, 2, 3, 3}, rng);
  for (auto pad : {Padding::same, Padding::valid})
    for (std::size_t s : {1u, 2u}) {
      double err = check([&] { return weighted_readout(conv2d(x, k, s, pad)); }, {x, k});
      EXPECT_LT(err, 1e-6) << "stride " << s;
    }
}

TEST(Dense, IdentityAndZeroInput) {
  auto x = TD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto eye = TD::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto zero_b = TD::zeros({3});
  auto y = dense(x, eye, zero_b);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y[i], x[i]);

  auto b = TD::from({2}, {0.5, -1.5});
  auto w = TD::from({3, 2}, {1, 2, 3, 4, 5, 6});
  auto z = dense(TD::zeros({4, 3}), w, b);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(z[r * 2], 0.5);
    EXPECT_EQ(z[r * 2 + 1], -1.5);
  }
}

TEST(Dense, DimensionMismatchThrows) {
  EXPECT_THROW(dense(TD::zeros({2, 3}), TD::zeros({4, 2}), TD::zeros({2})), ShapeError);
  EXPECT_THROW(dense(TD::zeros({2, 3}), TD::zeros({3, 2}), TD::zeros({3})), ShapeError);
}

TEST(Dense, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  auto x = random_tensor({3, 4}, rng);
  auto w = random_tensor({4, 5}, rng);
  auto b = random_tensor({5}, rng);
  EXPECT_LT(check([&] { return weighted_readout(dense(x, w, b)); }, {x, w, b}), 1e-6);
}

TEST(Pooling, ConstantMap) {
  auto f = TD::full({2, 3, 4, 5}, 1.75);
  auto a = global_avg_pool(f);
  auto m = global_max_pool(f);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(a[i], 1.75);
    EXPECT_EQ(m[i], 1.75);
  }
}

TEST(Pooling, SmallMap) {
  auto f = TD::from({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  EXPECT_DOUBLE_EQ(global_avg_pool(f).item(), 2.5);
  EXPECT_EQ(global_max_pool(f).item(), 4.0);
}

TEST(Pooling, AvgGradientIsUniform) {
  auto f = TD::full({1, 1, 3, 4}, 0.3, true);
  backward(sum(global_avg_pool(f)));
  for (double g : f.grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 12.0);
}

TEST(Pooling, MaxGradientGoesToFirstArgmax) {
  auto f = TD::from({1, 1, 2, 2}, {1, 5, 5, 2}, true);
  backward(sum(global_max_pool(f)));
  EXPECT_EQ(f.grad()[0], 0.0);
  EXPECT_EQ(f.grad()[1], 1.0);
  EXPECT_EQ(f.grad()[2], 0.0);
  EXPECT_EQ(f.grad()[3], 0.0);
}

TEST(Pooling, EmptySpatialThrows) {
  EXPECT_THROW(global_avg_pool(TD::zeros({1, 1, 0, 3})), ShapeError);
  EXPECT_THROW(global_max_pool(TD::zeros({1, 1, 2, 0})), ShapeError);
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  auto f = random_tensor({2, 3, 4, 4}, rng);
  EXPECT_LT(check([&] { return weighted_readout(global_avg_pool(f)); }, {f}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(global_max_pool(f)); }, {f}), 1e-6);
}

TEST(ChannelPool, SingleChannelCopiesPlane) {
  auto f = TD::from({1, 1, 2, 2}, {1, -2, 3, 0.5});
  auto p = channel_pool(f);
  ASSERT_EQ(p.shape(), (Shape{1, 2, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(p[i], f[i]);
    EXPECT_EQ(p[4 + i], f[i]);
  }
}

TEST(ChannelPool, MeanAndMax) {
  auto p = channel_pool(TD::from({1, 2, 1, 1}, {0, 4}));
  EXPECT_EQ(p[0], 2.0);
  EXPECT_EQ(p[1], 4.0);
}

TEST(ChannelPool, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  auto f = random_tensor({2, 5, 3, 3}, rng);
  EXPECT_LT(check([&] { return weighted_readout(channel_pool(f)); }, {f}), 1e-6);
}

TEST(Activations, KnownValues) {
  EXPECT_EQ(sigmoid(TD::scalar(0)).item(), 0.5);
  auto r = relu(TD::from({2}, {-1, 2}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  auto s = softmax(TD::from({3}, {0, 0, 0}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(s[i], 1.0 / 3.0);
}

TEST(Activations, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({7, 5}, rng, -10, 10, false);
    auto y = softmax(x);
    for (std::size_t r = 0; r < 7; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        s += y[r * 5 + j];
        EXPECT_GT(y[r * 5 + j], 0.0);
        EXPECT_LT(y[r * 5 + j], 1.0);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
  // max subtraction keeps large logits finite
  auto big = softmax(TD::from({2}, {1000, 999}));
  EXPECT_NEAR(big[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Activations, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto x = random_tensor({3, 4}, rng, -2, 2);
  EXPECT_LT(check([&] { return weighted_readout(sigmoid(x)); }, {x}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(softmax(x)); }, {x}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(softplus(x)); }, {x}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(exp(x)); }, {x}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(relu(x)); }, {x}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(add_scalar(scale(x, 3.0), 0.25)); }, {x}), 1e-6);
}

TEST(Broadcasts, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  auto f = random_tensor({2, 3, 4, 4}, rng);
  auto s = random_tensor({2, 3}, rng);
  auto m = random_tensor({2, 1, 4, 4}, rng);
  auto b = random_tensor({3}, rng);
  EXPECT_LT(check([&] { return weighted_readout(scale_channels(f, s)); }, {f, s}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(scale_spatial(f, m)); }, {f, m}), 1e-6);
  EXPECT_LT(check([&] { return weighted_readout(add_channel_bias(f, b)); }, {f, b}), 1e-6);
}

TEST(GaussianMembership, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  auto x = random_tensor({4, 3}, rng);
  auto c = random_tensor({5, 3}, rng);
  auto sg = random_tensor({5}, rng, 0.5, 2.0);
  EXPECT_LT(check([&] { return weighted_readout(gaussian_log_membership(x, c, sg)); }, {x, c, sg}), 1e-6);
}

TEST(Backward, SumGivesOnes) {
  auto x = TD::full({2, 3}, 4.0, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareAtThree) {
  auto x = TD::scalar(3.0, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, FanOutAccumulates) {
  // y = x*x + sigmoid(x); x reaches the root along three paths
  std::mt19937_64 rng(9);
  auto x = random_tensor({6}, rng);
  auto y = sum(add(mul(x, x), sigmoid(x)));
  backward(y);
  for (std::size_t i = 0; i < 6; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    EXPECT_NEAR(x.grad()[i], 2 * x[i] + s * (1 - s), 1e-14);
  }
}

TEST(Backward, ErrorsOnNonScalarAndRepeat) {
  auto x = TD::full({3}, 1.0, true);
  EXPECT_THROW(backward(mul(x, x)), GraphError);
  auto root = sum(x);
  backward(root);
  EXPECT_THROW(backward(root), GraphError);
  EXPECT_THROW(backward(sum(x)), GraphError);  // leaf grad still populated
  x.zero_grad();
  EXPECT_NO_THROW(backward(sum(x)));
}

TEST(Tensor, NonFiniteOutputThrows) {
  EXPECT_THROW(exp(TD::scalar(1000.0)), NumericError);
  auto nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(relu(TD::scalar(nan)), NumericError);
}

TEST(FiniteDiff, LinearIsExact) {
  std::mt19937_64 rng(10);
  auto x = random_tensor({10}, rng);
  EXPECT_LT(check([&] { return weighted_readout(x); }, {x}), 1e-9);
}

TEST(FiniteDiff, QuadraticBelowThreshold) {
  std::mt19937_64 rng(11);
  auto x = random_tensor({10}, rng);
  EXPECT_LT(check([&] { return sum(mul(x, x)); }, {x}), 1e-8);
}

TEST(FiniteDiff, WrongBackwardRuleIsCaught) {
  // square with a deliberately wrong derivative (x instead of 2x)
  auto bad_square = [](const TD& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
    auto xd = x.node()->data;
    return TD::from_op("bad_square", x.shape(), std::move(out), {x}, [xd](TensorNode<double>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*xd)[i];
    });
  };
  std::mt19937_64 rng(12);
  auto x = random_tensor({5}, rng);
  EXPECT_GE(check([&] { return sum(bad_square(x)); }, {x}), 1e-2);
}

TEST(FiniteDiff, NonScalarOutputThrows) {
  auto x = TD::full({3}, 1.0, true);
  EXPECT_THROW(finite_diff_check<double>([&] { return mul(x, x); }, {x}), GraphError);
}

TEST(Tensor, DetachSharesStorageWithoutHistory) {
  auto x = TD::full({2}, 2.0, true);
  auto d = x.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_EQ(d.data().data(), x.data().data());
  auto y = mul(d, d);
  EXPECT_FALSE(y.requires_grad());
}

TEST(FiniteDiff, ScaleFloorJudgesTinyCoordinatesAtTheGradientScale) {
  // d/da = 1e-12 * b is far below eps-level rounding noise of the 1e3 term
  auto a = TD::from({1}, {0.3}, true), b = TD::from({1}, {0.7}, true);
  auto f = [&] { return add(scale(mul(a, b), 1e-12), scale(mul(b, b), 1e3)); };
  GradCheckOptions opt;
  opt.scale_floor = 1e-3;
  EXPECT_LT(finite_diff_check<double>(f, {a, b}, opt).max_rel_error, 1e-6);
}

TEST(FiniteDiff, KinkProbeSkipsCoordinatesNextToARelu) {
  // relu kink 4e-6 away from x: inside eps=1e-5, outside eps/10
  auto x = TD::from({2}, {-4e-6, 0.5}, true);
  auto f = [&] { return sum(relu(x)); };
  GradCheckOptions plain;
  const auto bad = finite_diff_check<double>(f, {x}, plain);
  EXPECT_GT(bad.max_rel_error, 0.1);
  EXPECT_EQ(bad.nonsmooth, 0u);

  GradCheckOptions probe;
  probe.kink_tolerance = 1e-5;
  const auto r = finite_diff_check<double>(f, {x}, probe);
  EXPECT_EQ(r.nonsmooth, 1u);
  EXPECT_EQ(r.coordinates, 1u);
  EXPECT_LT(r.max_rel_error, 1e-8);
}
