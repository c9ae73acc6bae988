#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gplcp/kernel.hpp"

using namespace gplcp;

TEST(Rbf, ZeroDistanceGivesVariance) {
  const KernelParams k{KernelKind::rbf, 2.5, 3.7};
  const Vec3 x(1.0, -2.0, 0.5);
  EXPECT_EQ(rbf(x, x, k), 3.7);
}

TEST(Rbf, HalfDecayDistance) {
  const KernelParams k{KernelKind::rbf, 1.7, 4.0};
  const double r = k.lengthscale * std::sqrt(2.0 * std::log(2.0));
  EXPECT_NEAR(rbf(Vec3::Zero(), Vec3(0, r, 0), k), 2.0, 1e-14);
}

TEST(Rbf, TangleScaleOracle) {
  // sigma^2 e^{-1/2}, evaluated with 30-digit arithmetic.
  const KernelParams k{KernelKind::rbf, 36.33, 187.6 * 187.6};
  const double expected = 21346.0944705680896782904559226;
  const double value = rbf(Vec3(1, 2, 3), Vec3(1, 2 + 36.33, 3), k);
  EXPECT_NEAR(value, expected, 1e-13 * expected);
}

TEST(Rbf, SymmetricBoundedAndMonotone) {
  std::mt19937_64 rng(11);
  const KernelParams k{KernelKind::rbf, 1.3, 2.0};
  const Box3 box{Vec3::Constant(-3), Vec3::Constant(3)};
  for (int t = 0; t < 1000; ++t) {
    const Vec3 a = fixtures::random_point(rng, box), b = fixtures::random_point(rng, box);
    const double v = rbf(a, b, k);
    EXPECT_EQ(v, rbf(b, a, k));
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 2.0);
    // Further along the same direction is smaller.
    const Vec3 c = a + 1.5 * (b - a);
    EXPECT_LT(rbf(a, c, k), v);
    // Isotropy: rotate b - a about a.
    const Vec3 d = b - a;
    const Vec3 rotated = a + Vec3(d[1], d[2], d[0]);
    EXPECT_NEAR(rbf(a, rotated, k), v, 1e-15);
  }
}

TEST(CovMatrix, SinglePoint) {
  const KernelParams k{KernelKind::rbf, 1.0, 5.0};
  const std::vector<Vec3> p{Vec3(1, 1, 1)};
  const auto view = cov_matrix(p, p, k);
  ASSERT_EQ(view.data.rows(), 1);
  EXPECT_EQ(view.data(0, 0), 5.0);
  EXPECT_EQ(view.rows.size(), 1u);
}

TEST(CovMatrix, CollinearIsToeplitz) {
  const KernelParams k{KernelKind::rbf, 0.8, 1.5};
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(0.5, 0, 0), Vec3(1.0, 0, 0)};
  const auto c = cov_block(p, p, k);
  EXPECT_EQ(c, c.transpose());
  EXPECT_DOUBLE_EQ(c(0, 1), c(1, 2));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(c(i, i), 1.5);
}

TEST(CovMatrix, MatchesElementLoop) {
  std::mt19937_64 rng(3);
  const KernelParams k{KernelKind::rbf, 0.9, 2.2};
  const Box3 box{Vec3::Zero(), Vec3::Constant(2)};
  std::vector<Vec3> rows, cols;
  for (int i = 0; i < 4; ++i) rows.push_back(fixtures::random_point(rng, box));
  for (int j = 0; j < 6; ++j) cols.push_back(fixtures::random_point(rng, box));
  const auto view = cov_matrix(rows, cols, k);
  ASSERT_EQ(view.data.rows(), 4);
  ASSERT_EQ(view.data.cols(), 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) {
      const double r2 = (rows[i] - cols[j]).squaredNorm();
      EXPECT_NEAR(view.data(i, j), 2.2 * std::exp(-r2 / (2 * 0.81)), 1e-15);
    }
}

TEST(CovMatrix, PsdAfterJitter) {
  std::mt19937_64 rng(5);
  const KernelParams k{KernelKind::rbf, 1.0, 3.0};
  const Box3 box{Vec3::Zero(), Vec3::Constant(4)};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> x;
    const int n = 1 + int(rng() % 50);
    for (int i = 0; i < n; ++i) x.push_back(fixtures::random_point(rng, box));
    Eigen::MatrixXd c = cov_block(x, x, k);
    c.diagonal().array() += 1e-10 * k.variance;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    EXPECT_EQ(llt.info(), Eigen::Success) << "n=" << n;
  }
}

TEST(RbfGradient, ZeroAtReference) {
  const KernelParams k{KernelKind::rbf, 1.0, 1.0};
  const Vec3 x(0.3, 0.1, -0.2);
  EXPECT_EQ(rbf_spatial_gradient(x, x, k), Vec3::Zero());
}

TEST(RbfGradient, PointsTowardReference) {
  std::mt19937_64 rng(9);
  const KernelParams k{KernelKind::rbf, 1.2, 2.0};
  const Box3 box{Vec3::Constant(-2), Vec3::Constant(2)};
  for (int t = 0; t < 100; ++t) {
    const Vec3 x = fixtures::random_point(rng, box), r = fixtures::random_point(rng, box);
    const Vec3 g = rbf_spatial_gradient(x, r, k);
    for (int a = 0; a < 3; ++a)
      if (x[a] != r[a]) EXPECT_LT(g[a] * (x[a] - r[a]), 0.0);
  }
}

TEST(RbfGradient, FiniteDifference) {
  std::mt19937_64 rng(13);
  const KernelParams k{KernelKind::rbf, 1.4, 3.0};
  const Box3 box{Vec3::Constant(-2), Vec3::Constant(2)};
  const double h = 1e-5 * k.lengthscale;
  for (int t = 0; t < 100; ++t) {
    const Vec3 x = fixtures::random_point(rng, box), r = fixtures::random_point(rng, box);
    const Vec3 g = rbf_spatial_gradient(x, r, k);
    Vec3 fd;
    for (int a = 0; a < 3; ++a) {
      Vec3 p = x, m = x;
      p[a] += h;
      m[a] -= h;
      fd[a] = (rbf(p, r, k) - rbf(m, r, k)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-6 * std::max(fd.norm(), 1e-3)) << t;
  }
}

TEST(DistanceThreshold, Values) {
  EXPECT_NEAR(distance_threshold({KernelKind::rbf, 12.79, 1.0}, 6.0), 76.74, 1e-12);
  EXPECT_EQ(distance_threshold({KernelKind::rbf, 1.0, 1.0}, 1.0), 1.0);
  const KernelParams k{KernelKind::rbf, 2.0, 5.0};
  const double r = distance_threshold(k, 6.0);
  EXPECT_NEAR(rbf(Vec3::Zero(), Vec3(r, 0, 0), k) / k.variance, std::exp(-18.0), 1e-20);
  EXPECT_NEAR(std::exp(-18.0), 1.523e-8, 1e-11);
}
