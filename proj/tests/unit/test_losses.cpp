#include <gtest/gtest.h>

#include <numeric>

#include "grad_instance.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/losses.hpp"

using namespace ptmvqa;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(SmoothL1, Values) {
  EXPECT_EQ(smooth_l1(3.0, 3.0), 0.0);
  EXPECT_EQ(smooth_l1(3.5, 3.0), 0.125);
  EXPECT_EQ(smooth_l1(2.5, 3.0), 0.125);
  EXPECT_EQ(smooth_l1(5.0, 3.0), 1.5);
  EXPECT_EQ(smooth_l1_grad(3.5, 3.0), 0.5);
  EXPECT_EQ(smooth_l1_grad(0.0, 3.0), -1.0);
}

TEST(Intra, Values) {
  const Vector v = vec({0.3, -2.0, 1.0});
  const std::vector<Vector> same = {v, v, v};
  EXPECT_NEAR(intra_loss(same), 0.0, 1e-15);
  const std::vector<Vector> ortho = {vec({1, 0}), vec({0, 1})};
  EXPECT_EQ(intra_loss(ortho), 1.0);
  const std::vector<Vector> anti = {v, -v};
  EXPECT_NEAR(intra_loss(anti), 2.0, 1e-15);
}

TEST(Intra, Errors) {
  const std::vector<Vector> one = {vec({1, 2})};
  EXPECT_THROW(intra_loss(one), ValidationError);
  const std::vector<Vector> zero = {vec({1, 2}), vec({0, 0})};
  EXPECT_THROW(intra_loss(zero), ValidationError);
}

TEST(Intra, RangeRescalingAndPermutation) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vector> f;
    for (int n = 0; n < 4; ++n) {
      Vector v(6);
      for (auto& x : v) x = rng.normal();
      f.push_back(v);
    }
    const double base = intra_loss(f);
    ASSERT_GE(base, 0.0);
    ASSERT_LE(base, 2.0);
    auto scaled = f;
    scaled[1] *= rng.uniform(0.01, 50.0);
    ASSERT_NEAR(intra_loss(scaled), base, 1e-12);
    auto perm = f;
    std::swap(perm[0], perm[3]);
    ASSERT_NEAR(intra_loss(perm), base, 1e-12);
  }
}

TEST(Centroids, Examples) {
  const std::vector<Vector> one = {vec({4, 5})};
  const std::vector<std::size_t> c2 = {2};
  const auto a = batch_centroids(one, c2);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.at(2).c, vec({4, 5}));
  EXPECT_EQ(a.at(2).count, 1u);

  const std::vector<Vector> two = {vec({0, 0}), vec({2, 2})};
  const std::vector<std::size_t> same = {0, 0};
  EXPECT_EQ(batch_centroids(two, same).at(0).c, vec({1, 1}));
}

TEST(Centroids, MatchNaiveGrouping) {
  Rng rng(4);
  std::vector<Vector> h;
  std::vector<std::size_t> cl;
  for (int i = 0; i < 30; ++i) {
    Vector v(3);
    for (auto& x : v) x = rng.normal();
    h.push_back(v);
    cl.push_back(rng.index(5) * 2);
  }
  const auto got = batch_centroids(h, cl);
  for (std::size_t k = 0; k < 10; ++k) {
    Vector sum = Vector::Zero(3);
    std::size_t n = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (cl[i] == k) {
        sum += h[i];
        ++n;
      }
    }
    if (n == 0) {
      EXPECT_EQ(got.count(k), 0u);
      continue;
    }
    ASSERT_EQ(got.at(k).count, n);
    EXPECT_TRUE(got.at(k).c.isApprox(sum / double(n), 1e-14));
  }
}

TEST(Inter, Values) {
  BatchCentroids c;
  c[0] = {vec({0, 0}), 1};
  c[1] = {vec({1, 0}), 1};
  // anchor at its own centroid, negative at squared distance 1
  EXPECT_EQ(inter_loss(vec({0, 0}), 0, c, 0.05).value, 0.0);
  // equidistant anchor
  EXPECT_EQ(inter_loss(vec({0.5, 3}), 0, c, 0.05).value, 0.05);
  // |h-c_k|^2 = 1, |h-c_t|^2 = 0.5
  BatchCentroids d;
  d[0] = {vec({0, 0}), 2};
  d[1] = {vec({1.0 - std::sqrt(0.5), 0}), 2};
  const auto t = inter_loss(vec({1, 0}), 0, d, 0.05);
  EXPECT_NEAR(t.value, 0.55, 1e-15);
  EXPECT_EQ(t.negative, 1u);
}

TEST(Inter, HardestNegativeAndMissingNegative) {
  BatchCentroids c;
  c[0] = {vec({0}), 1};
  c[1] = {vec({5}), 1};
  c[2] = {vec({2}), 1};
  EXPECT_EQ(inter_loss(vec({0}), 0, c, 0.05).negative, 2u);
  BatchCentroids lone;
  lone[3] = {vec({1}), 2};
  const auto t = inter_loss(vec({0}), 3, lone, 0.05);
  EXPECT_EQ(t.value, 0.0);
  EXPECT_FALSE(t.negative.has_value());
}

namespace {

struct RandomBatch {
  std::vector<double> preds, targets;
  std::vector<std::vector<Vector>> f;
  std::vector<Vector> h;
  std::vector<std::size_t> clusters;
  std::vector<std::optional<Triplet>> triplets;
  BatchInputs inputs() const { return {preds, targets, f, h, clusters, triplets}; }
};

RandomBatch random_batch(std::uint64_t seed, std::size_t B, std::size_t N) {
  Rng rng(seed);
  RandomBatch b;
  for (std::size_t i = 0; i < B; ++i) {
    b.preds.push_back(rng.uniform(1, 5));
    b.targets.push_back(rng.uniform(1, 5));
    std::vector<Vector> fi;
    for (std::size_t n = 0; n < N; ++n) {
      Vector v(4);
      for (auto& x : v) x = rng.normal();
      fi.push_back(v);
    }
    b.f.push_back(fi);
    Vector h(4);
    for (auto& x : h) x = rng.normal();
    b.h.push_back(h);
    b.clusters.push_back(rng.index(3));
  }
  b.triplets = choose_triplets(b.clusters, rng);
  return b;
}

}  // namespace

TEST(Total, BetaZeroIsSmoothL1Bitwise) {
  const auto b = random_batch(1, 9, 3);
  LossConfig cfg;
  cfg.beta = 0.0;
  const auto r = total_loss(b.inputs(), cfg, false);
  double l1 = 0.0;
  for (std::size_t i = 0; i < 9; ++i) l1 += smooth_l1(b.preds[i], b.targets[i]);
  l1 /= 9.0;
  EXPECT_EQ(r.breakdown.total, r.breakdown.l1);
  EXPECT_EQ(r.breakdown.l1, l1);
}

TEST(Total, AllTermsVanish) {
  RandomBatch b;
  const Vector v = vec({1, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    b.preds.push_back(2.0 + double(i));
    b.targets.push_back(2.0 + double(i));
    b.f.push_back({v, v * 3.0});
    b.h.push_back(i < 2 ? vec({0, 0}) : vec({100, 0}));
    b.clusters.push_back(i < 2 ? 0 : 1);
  }
  const auto r = total_loss(b.inputs(), {}, false);
  EXPECT_NEAR(r.breakdown.total, 0.0, 1e-15);
}

TEST(Total, MatchesNaiveRecomputation) {
  for (auto mode : {InterMode::kCentroid, InterMode::kSampleTriplet}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto g = oracle::make_instance(seed, 1 + seed % 4, 5, 6, {8, 32}, mode, 7, 0.0);
      LossBreakdown lib;
      oracle::analytic_gradient(g, &lib);
      const auto ref = oracle::loss(g.params, g.omega, g.batch, g.cfg, &g.triplets);
      EXPECT_NEAR(lib.l1, ref.l1, 1e-12);
      EXPECT_NEAR(lib.intra, ref.intra, 1e-12);
      EXPECT_NEAR(lib.inter, ref.inter, 1e-12);
      EXPECT_NEAR(lib.total, ref.total, 1e-12);
      EXPECT_EQ(lib.total, lib.l1 + lib.beta * (lib.intra + lib.inter));
    }
  }
}

TEST(Total, BatchOrderInvariance) {
  const auto b = random_batch(5, 11, 2);
  const auto base = total_loss(b.inputs(), {}, false).breakdown;
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm(11);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    RandomBatch p;
    for (auto i : perm) {
      p.preds.push_back(b.preds[i]);
      p.targets.push_back(b.targets[i]);
      p.f.push_back(b.f[i]);
      p.h.push_back(b.h[i]);
      p.clusters.push_back(b.clusters[i]);
    }
    const auto r = total_loss(p.inputs(), {}, false).breakdown;
    ASSERT_NEAR(r.l1, base.l1, 1e-12);
    ASSERT_NEAR(r.intra, base.intra, 1e-12);
    ASSERT_NEAR(r.inter, base.inter, 1e-12);
    ASSERT_NEAR(r.total, base.total, 1e-12);
  }
}

TEST(Total, SingleModelHasNoIntra) {
  const auto b = random_batch(2, 5, 1);
  EXPECT_EQ(total_loss(b.inputs(), {}, false).breakdown.intra, 0.0);
}

TEST(Triplets, PositiveSharesClusterNegativeDoesNot) {
  Rng rng(0);
  const std::vector<std::size_t> cl = {0, 0, 1, 1, 2};
  const auto t = choose_triplets(cl, rng);
  ASSERT_EQ(t.size(), cl.size());
  for (std::size_t i = 0; i < cl.size(); ++i) {
    if (i == 4) {
      EXPECT_FALSE(t[i].has_value());
      continue;
    }
    ASSERT_TRUE(t[i].has_value());
    EXPECT_NE(t[i]->positive, i);
    EXPECT_EQ(cl[t[i]->positive], cl[i]);
    EXPECT_NE(cl[t[i]->negative], cl[i]);
  }
}
