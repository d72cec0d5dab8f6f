#include <gtest/gtest.h>

#include "naive.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/model.hpp"

using namespace ptmvqa;

TEST(InitHeads, ShapesAndDeterminism) {
  const std::vector<std::uint32_t> dims = {1024, 2048};
  const auto a = init_heads(dims, 128, 256, 42);
  const auto b = init_heads(dims, 128, 256, 42);
  EXPECT_TRUE(a.identical(b));
  EXPECT_FALSE(a.identical(init_heads(dims, 128, 256, 43)));
  ASSERT_EQ(a.heads.size(), 2u);
  EXPECT_EQ(a.heads[0].w1.rows(), 256);
  EXPECT_EQ(a.heads[0].w1.cols(), 1024);
  EXPECT_EQ(a.heads[1].w1.cols(), 2048);
  EXPECT_EQ(a.heads[1].w2.rows(), 128);
  EXPECT_EQ(a.w_reg.size(), 128);
  EXPECT_EQ(a.input_dims(), dims);
}

TEST(InitHeads, GlorotBoundsAndConstants) {
  const std::vector<std::uint32_t> dims = {20};
  const auto p = init_heads(dims, 8, 12, 1);
  const double a1 = std::sqrt(6.0 / (20 + 12));
  EXPECT_LE(p.heads[0].w1.cwiseAbs().maxCoeff(), a1);
  EXPECT_GT(p.heads[0].w1.cwiseAbs().maxCoeff(), 0.5 * a1);
  EXPECT_LE(p.heads[0].w2.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (12 + 8)));
  EXPECT_TRUE(p.heads[0].b1.isZero());
  EXPECT_TRUE(p.heads[0].shift2.isZero());
  EXPECT_TRUE((p.heads[0].gain1.array() == 1.0).all());
  EXPECT_EQ(p.b_reg, 0.0);
}

TEST(Forward, OutputWidthIsD) {
  const std::vector<std::uint32_t> dims = {7, 33};
  const auto p = init_heads(dims, 128, 16, 0);
  const std::vector<Vector> z = {Vector::Ones(7), Vector::Ones(33)};
  const std::vector<double> omega = {1.0, 2.0};
  const auto t = predict(p, z, omega);
  EXPECT_EQ(t.heads[0].f.size(), 128);
  EXPECT_EQ(t.heads[1].f.size(), 128);
  EXPECT_EQ(t.h.size(), 128);
}

TEST(Forward, ZeroParamsGiveZeroFeature) {
  const std::vector<std::uint32_t> dims = {4};
  auto p = init_heads(dims, 3, 5, 0);
  p.heads[0].w1.setZero();
  p.heads[0].w2.setZero();
  const auto t = transform_forward(p.heads[0], Vector::Zero(4));
  EXPECT_TRUE(t.layer1.out.isZero());
  EXPECT_TRUE(t.f.isZero());
}

TEST(Forward, RepeatedCallsBitwiseIdentical) {
  Rng rng(3);
  const auto p = oracle::random_params({9}, 6, 10, rng);
  Vector z(9);
  for (auto& x : z) x = rng.normal();
  const std::vector<Vector> zs = {z};
  const std::vector<double> omega = {0.7};
  EXPECT_EQ(predict(p, zs, omega).score, predict(p, zs, omega).score);
}

TEST(Forward, MatchesNaiveImplementation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t N = 1 + rng.index(4);
    std::vector<std::uint32_t> dims;
    for (std::size_t n = 0; n < N; ++n) dims.push_back(static_cast<std::uint32_t>(1 + rng.index(40)));
    const auto p = oracle::random_params(dims, 1 + rng.index(64), 1 + rng.index(64), rng);
    std::vector<oracle::Vec> z;
    std::vector<Vector> ze;
    std::vector<double> omega;
    for (auto d : dims) {
      oracle::Vec v(d);
      for (auto& x : v) x = 3.0 * rng.normal();
      z.push_back(v);
      ze.push_back(Eigen::Map<const Vector>(v.data(), d));
      omega.push_back(rng.uniform(0.1, 4.0));
    }
    const auto lib = predict(p, ze, omega);
    const auto ref = oracle::forward(p, z, omega);
    ASSERT_NEAR(lib.score, ref.score, 1e-12) << "seed " << seed;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t d = 0; d < ref.f[n].size(); ++d) ASSERT_NEAR(lib.heads[n].f[d], ref.f[n][d], 1e-12);
    }
    for (std::size_t d = 0; d < ref.h.size(); ++d) ASSERT_NEAR(lib.h[d], ref.h[d], 1e-12);
  }
}

TEST(Forward, DimensionMismatch) {
  const std::vector<std::uint32_t> dims = {4};
  const auto p = init_heads(dims, 3, 5, 0);
  EXPECT_THROW(transform_forward(p.heads[0], Vector::Zero(5)), ValidationError);
  const std::vector<Vector> none;
  const std::vector<double> omega;
  EXPECT_THROW(predict(p, none, omega), ValidationError);
}

TEST(Aggregate, WorkedExample) {
  Vector f1(2), f2(2);
  f1 << 1, 0;
  f2 << 0, 1;
  const std::vector<Vector> f = {f1, f2};
  const std::vector<double> omega = {1.6129, 0.4016};
  const auto h = aggregate(f, omega);
  EXPECT_NEAR(h[0], 0.8006, 5e-5);
  EXPECT_NEAR(h[1], 0.1994, 5e-5);
}

TEST(Aggregate, FixedPointAndUniformMean) {
  Vector v(3);
  v << 0.3, -1.2, 2.0;
  const std::vector<Vector> same = {v, v};
  const std::vector<double> w = {0.1, 9.0};
  EXPECT_TRUE(aggregate(same, w).isApprox(v, 1e-15));
  Vector u(3);
  u << 1.0, 1.0, 1.0;
  const std::vector<Vector> two = {v, u};
  const std::vector<double> eq = {0.5, 0.5};
  EXPECT_TRUE(aggregate(two, eq).isApprox((v + u) / 2.0, 1e-15));
}

TEST(Aggregate, CommonScaleInvariance) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> f;
    std::vector<double> w, ws;
    const double c = rng.uniform(0.01, 100.0);
    for (int n = 0; n < 4; ++n) {
      Vector v(5);
      for (auto& x : v) x = rng.normal();
      f.push_back(v);
      w.push_back(rng.uniform(0.1, 3.0));
      ws.push_back(w.back() * c);
    }
    const auto a = aggregate(f, w);
    const auto b = aggregate(f, ws);
    for (int d = 0; d < 5; ++d) ASSERT_NEAR(a[d], b[d], 1e-15);
  }
}

TEST(Aggregate, RejectsBadWeights) {
  const std::vector<Vector> f = {Vector::Ones(2)};
  const std::vector<double> zero = {0.0};
  const std::vector<Vector> none;
  const std::vector<double> empty;
  EXPECT_THROW(aggregate(f, zero), ValidationError);
  EXPECT_THROW(aggregate(none, empty), ValidationError);
}

TEST(Predict, ConstantHead) {
  const std::vector<std::uint32_t> dims = {6, 2};
  auto p = init_heads(dims, 4, 4, 5);
  p.w_reg.setZero();
  p.b_reg = 3.7;
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const std::vector<Vector> z = {Vector::Random(6) * 10, Vector::Random(2)};
    const std::vector<double> omega = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
    EXPECT_EQ(predict(p, z, omega).score, 3.7);
  }
}

TEST(Predict, SingleModelReducesToRegressionOnF) {
  Rng rng(4);
  const auto p = oracle::random_params({5}, 3, 4, rng);
  const std::vector<Vector> z = {Vector::LinSpaced(5, 0.0, 1.0)};
  const std::vector<double> omega = {0.5};
  const auto t = predict(p, z, omega);
  EXPECT_NEAR(t.score, p.w_reg.dot(t.heads[0].f) + p.b_reg, 1e-15);
}

TEST(Gelu, KnownValuesAndDerivative) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    const double fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
    EXPECT_NEAR(gelu_grad(x), fd, 1e-8);
  }
}

TEST(HeadParams, TensorOrderAndDecayFlags) {
  const std::vector<std::uint32_t> dims = {3};
  auto p = init_heads(dims, 2, 4, 0);
  const auto t = p.tensors();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t[0].name, "head0.w1");
  EXPECT_TRUE(t[0].decay);
  EXPECT_FALSE(t[1].decay);
  EXPECT_FALSE(t[2].decay);
  EXPECT_TRUE(t[4].decay);
  EXPECT_EQ(t[8].name, "w_reg");
  EXPECT_TRUE(t[8].decay);
  EXPECT_FALSE(t[9].decay);
  EXPECT_EQ(p.parameter_count(), 4u * 3 + 4 * 3 + 2 * 4 + 2 * 3 + 2 + 1);
}
