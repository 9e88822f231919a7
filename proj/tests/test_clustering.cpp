#include <gtest/gtest.h>

#include <random>

#include "coverassert/clustering.hpp"
#include "coverassert/error.hpp"
#include "oracles.hpp"

using namespace coverassert;

namespace {

Eigen::MatrixXd random_points(std::mt19937_64& rng, int n, int d) {
  Eigen::MatrixXd m(n, d);
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

Eigen::MatrixXd no_constraints(int n) { return Eigen::MatrixXd::Zero(n, n); }

}  // namespace

TEST(Dbscan, SinglePointIsNoise) {
  Eigen::MatrixXd p(1, 3);
  p << 1, 0, 0;
  EXPECT_EQ(dbscan(p, 0.1, 2), (std::vector<int>{kNoise}));
  EXPECT_EQ(dbscan(p, 0.1, 1), (std::vector<int>{0}));
}

TEST(Dbscan, TwoOrthogonalBundles) {
  Eigen::MatrixXd p(6, 2);
  p << 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1;
  EXPECT_EQ(dbscan(p, 0.1, 2), (std::vector<int>{0, 1, 0, 1, 0, 1}));
}

TEST(Dbscan, MatchesDensityOracleOnRandomUnitVectors) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::MatrixXd p(20, 4);
    for (int i = 0; i < 20; ++i) p.row(i) = oracle::random_unit(rng, 4).transpose();
    double eps = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    int min_pts = std::uniform_int_distribution<int>(1, 4)(rng);
    auto got = dbscan(p, eps, min_pts);
    auto want = oracle::dbscan(p, eps, min_pts);
    EXPECT_TRUE(oracle::same_partition(got, want));
    EXPECT_EQ(got, want);
  }
}

TEST(Dbscan, DefaultEpsIsMedianOfTenthPercentile) {
  Eigen::MatrixXd p(4, 2);
  p << 1, 0, 0, 1, 1, 1, -1, 0;
  auto d = cosine_distances(p);
  // m = 3 other points, nearest rank ceil(0.3) = 1: nearest neighbour distance
  std::vector<double> nearest;
  for (int i = 0; i < 4; ++i) {
    double best = 1e9;
    for (int j = 0; j < 4; ++j)
      if (j != i) best = std::min(best, d(i, j));
    nearest.push_back(best);
  }
  std::sort(nearest.begin(), nearest.end());
  EXPECT_NEAR(default_eps(p), (nearest[1] + nearest[2]) / 2, 1e-12);
}

TEST(Pca, RankOneHasFullEvr) {
  Eigen::MatrixXd q(6, 3);
  for (int i = 0; i < 6; ++i) q.row(i) = (i + 1.0) * Eigen::RowVector3d(1, 2, -3);
  auto r = pca_project(q, 1);
  EXPECT_NEAR(r.evr, 1.0, 1e-9);
}

TEST(Pca, IsotropicPlaneInFiveColumns) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int n = 2000;
  Eigen::MatrixXd q(n, 5);
  for (int i = 0; i < n; ++i) {
    double x = g(rng), y = g(rng);
    q.row(i) << x, y, -x, -y, 7.0;
  }
  EXPECT_NEAR(pca_project(q, 2).evr, 1.0, 1e-6);
  EXPECT_NEAR(pca_project(q, 1).evr, 0.5, 0.05);
  auto ref = oracle::pca(q, 2);
  EXPECT_NEAR(pca_project(q, 2).evr, ref.evr, 1e-9);
}

TEST(Pca, ProjectionIsCentred) {
  std::mt19937_64 rng(4);
  auto q = random_points(rng, 15, 6);
  auto r = pca_project(q, 4);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(r.projected.col(c).mean(), 0.0, 1e-9);
}

TEST(Pca, MatchesJacobiOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    int d = std::uniform_int_distribution<int>(2, 30)(rng);
    int n = d + 10;
    Eigen::MatrixXd q(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) q(i, j) = std::uniform_int_distribution<int>(0, 11)(rng);
    int dims = std::uniform_int_distribution<int>(1, d)(rng);
    auto got = pca_project(q, dims);
    auto want = oracle::pca(q, dims);
    EXPECT_NEAR(got.evr, want.evr, 1e-6);
    EXPECT_LT((got.projected - want.projected).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Pca, IdenticalRowsAreDegenerate) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(4, 3, 2.0);
  auto r = pca_project(q, 2);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.evr, 1.0);
  EXPECT_EQ(r.projected.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pca, RejectsTooManyDims) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(4, 3);
  EXPECT_THROW(pca_project(q, 4), InvalidArgument);
  EXPECT_THROW(pca_project(q.topRows(1), 1), InvalidArgument);
}

TEST(Pca, AutoEscalatesUntilFloor) {
  std::mt19937_64 rng(9);
  auto q = random_points(rng, 40, 12);
  auto r = pca_project_auto(q, 2, 0.97);
  EXPECT_GE(r.evr, 0.97);
  EXPECT_LT(pca_project(q, r.dims - 1).evr, 0.97);
}

TEST(Fuse, ThreeClustersTwentyDims) {
  std::mt19937_64 rng(1);
  auto q = random_points(rng, 30, 25);
  auto proj = pca_project(q, 20).projected;
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  EXPECT_EQ(fuse(labels, proj).cols(), 23);
}

TEST(Fuse, AllNoiseGivesBasisVectors) {
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(4, 2);
  std::vector<int> labels(4, kNoise);
  auto f = fuse(labels, proj);
  ASSERT_EQ(f.cols(), 6);
  EXPECT_EQ(f.rightCols(4), Eigen::MatrixXd::Identity(4, 4));
}

TEST(Fuse, PermutationPermutesRows) {
  Eigen::MatrixXd proj(4, 1);
  proj << 1, 2, 3, 4;
  std::vector<int> a{5, 2, 5, kNoise};
  std::vector<int> perm{3, 1, 0, 2};  // new row r takes old row perm[r]
  std::vector<int> b;
  Eigen::MatrixXd pb(4, 1);
  for (int r = 0; r < 4; ++r) {
    b.push_back(a[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])]);
    pb(r, 0) = proj(perm[static_cast<std::size_t>(r)], 0);
  }
  auto fa = fuse(a, proj), fb = fuse(b, pb);
  EXPECT_EQ(fa.cols(), fb.cols());
  for (int r = 0; r < 4; ++r) EXPECT_EQ(fb.row(r).leftCols(1), fa.row(perm[static_cast<std::size_t>(r)]).leftCols(1));
  // one-hot blocks describe the same partition
  auto pattern = [](const Eigen::MatrixXd& f, int i, int j) { return f.row(i).rightCols(3) == f.row(j).rightCols(3); };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_EQ(pattern(fb, i, j), pattern(fa, perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]));
}

TEST(Silhouette, DuplicatedClustersScoreOne) {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 0, 0, 5, 5, 5, 5;
  EXPECT_EQ(silhouette(p, std::vector<int>{0, 0, 1, 1}), 1.0);
}

TEST(Silhouette, ThinRectangleByLongSide) {
  const double L = 10, h = 1;
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, L, 0, 0, h, L, h;
  double a = L, b = (h + std::sqrt(L * L + h * h)) / 2;
  double expect = (b - a) / std::max(a, b);
  std::vector<int> labels{0, 0, 1, 1};
  EXPECT_NEAR(silhouette(p, labels), expect, 1e-12);
  EXPECT_NEAR(silhouette(p, labels), oracle::silhouette(p, labels), 1e-12);
}

TEST(Silhouette, IdenticalPointsScoreZero) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(5, 3);
  EXPECT_EQ(silhouette(p, std::vector<int>{0, 1, 0, 1, 1}), 0.0);
}

TEST(Silhouette, SingleClusterThrows) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Random(3, 2);
  EXPECT_THROW(silhouette(p, std::vector<int>{4, 4, 4}), SingleCluster);
}

TEST(FinalCluster, WellSeparatedClouds) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 0.05);
  Eigen::MatrixXd p(10, 2);
  for (int i = 0; i < 10; ++i) p.row(i) << (i < 5 ? 0 : 10) + g(rng), g(rng);
  FusionConfig cfg;
  auto r = final_cluster(p, no_constraints(10), cfg, {2, 5});
  EXPECT_EQ(r.k, 2);
  ASSERT_TRUE(r.silhouette);
  EXPECT_GT(*r.silhouette, 0.9);
}

TEST(FinalCluster, CannotLinkSeparatesIdenticalRows) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 2);
  p(2, 0) = p(3, 0) = 10;
  Eigen::MatrixXd sd = Eigen::MatrixXd::Zero(4, 4);
  sd(0, 1) = sd(1, 0) = 20;
  FusionConfig cfg;
  auto r = final_cluster(p, sd, cfg, {2, 2});
  EXPECT_NE(r.labels[0], r.labels[1]);
  EXPECT_FALSE(r.infeasible_k);
  EXPECT_EQ(r.k, 2);
}

TEST(FinalCluster, InfeasibleRangeFlagsMinimalK) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 1);
  Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(3, 3, 30);
  FusionConfig cfg;
  auto r = final_cluster(p, sd, cfg, {1, 2});
  EXPECT_TRUE(r.infeasible_k);
  EXPECT_EQ(r.k, 3);
}

TEST(FinalCluster, SilhouetteIsBestConstrainedCut) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    int n = std::uniform_int_distribution<int>(4, 10)(rng);
    auto p = random_points(rng, n, 3);
    Eigen::MatrixXd sd = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        sd(i, j) = sd(j, i) = std::bernoulli_distribution(0.15)(rng) ? 20.0 : 3.0;
    FusionConfig cfg;
    std::pair<int, int> range{2, n - 1};
    auto r = final_cluster(p, sd, cfg, range);
    auto levels = oracle::constrained_levels(p, sd, cfg.tau);
    double best = -2;
    int best_k = 0;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      int k = *std::max_element(it->begin(), it->end()) + 1;
      if (k < range.first || k > range.second) continue;
      double s = oracle::silhouette(p, *it);
      if (s > best) {
        best = s;
        best_k = k;
      }
    }
    if (best_k == 0) {
      EXPECT_TRUE(r.infeasible_k);
      continue;
    }
    ASSERT_TRUE(r.silhouette);
    EXPECT_NEAR(*r.silhouette, best, 1e-12);
    EXPECT_EQ(r.k, best_k);
  }
}

TEST(ConstrainedLinkage, LevelsMatchNaiveRecomputation) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    int n = std::uniform_int_distribution<int>(3, 12)(rng);
    auto p = random_points(rng, n, 2);
    Eigen::MatrixXd sd = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) sd(i, j) = sd(j, i) = std::bernoulli_distribution(0.2)(rng) ? 16.0 : 1.0;
    auto dendro = constrained_average_linkage(p, cannot_link_from_sd(sd, 15));
    auto want = oracle::constrained_levels(p, sd, 15);
    ASSERT_EQ(dendro.levels.size(), want.size());
    for (std::size_t s = 0; s < want.size(); ++s) EXPECT_EQ(dendro.levels[s], want[s]);
  }
}

TEST(ClusterAssertions, DeterministicAndSound) {
  std::mt19937_64 rng(23);
  const int n = 12;
  Eigen::MatrixXd sem(n, 16);
  for (int i = 0; i < n; ++i) sem.row(i) = oracle::random_unit(rng, 16).transpose();
  Eigen::MatrixXi paths(n, 9);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 9; ++j) paths(i, j) = std::uniform_int_distribution<int>(0, 11)(rng);
  Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(n, n, 4);
  sd(0, 5) = sd(5, 0) = 18;
  FusionConfig cfg;
  auto a = cluster_assertions(sem, paths, sd, cfg, 3);
  auto b = cluster_assertions(sem, paths, sd, cfg, 3);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.labels[0], a.labels[5]);
  EXPECT_EQ(a.fused.cols(), a.pca_dims + one_hot_width(a.semantic_labels));
  EXPECT_EQ(a.k_range, (std::pair<int, int>{2, 6}));
}

TEST(ClusterAssertions, SinglePointSkipsPca) {
  Eigen::MatrixXd sem(1, 8);
  sem.setOnes();
  Eigen::MatrixXi paths = Eigen::MatrixXi::Ones(1, 3);
  FusionConfig cfg;
  auto r = cluster_assertions(sem, paths, Eigen::MatrixXd::Zero(1, 1), cfg, 2);
  EXPECT_EQ(r.labels, (std::vector<int>{0}));
  EXPECT_EQ(r.pca_dims, 0);
  EXPECT_FALSE(r.silhouette);
}

TEST(FusionConfig, Validation) {
  FusionConfig c;
  c.evr_floor = 0;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = {};
  c.tau = -1;
  EXPECT_THROW(validate(c), InvalidArgument);
}
