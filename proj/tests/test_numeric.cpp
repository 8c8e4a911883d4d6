#include <gtest/gtest.h>

#include <cmath>

#include "lindml/numeric.hpp"

using namespace lindml;

namespace {

Vector random_vector(std::size_t d, SeededRng& rng, double scale = 1.0) {
  Vector v = standard_normal_vector(d, rng);
  v *= scale;
  return v;
}

}  // namespace

TEST(EuclidDist, Examples) {
  EXPECT_EQ(euclid_dist({0.3, -1.2, 4.0}, {0.3, -1.2, 4.0}), 0.0);
  for (std::size_t d = 2; d <= 6; ++d) {
    Vector e1(d, 0.0), e2(d, 0.0);
    e1[0] = 1.0;
    e2[1] = 1.0;
    EXPECT_DOUBLE_EQ(euclid_dist(e1, e2), std::sqrt(2.0));
  }
  EXPECT_DOUBLE_EQ(euclid_dist({3.0, 0.0}, {0.0, 4.0}), 5.0);
}

TEST(EuclidDist, DimensionMismatchThrows) {
  try {
    euclid_dist({1.0, 2.0}, {1.0, 2.0, 3.0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(EuclidDist, MetricProperties) {
  SeededRng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t d = 1 + rng.index(12);
    const Vector a = random_vector(d, rng, 3.0);
    const Vector b = random_vector(d, rng, 3.0);
    const Vector c = random_vector(d, rng, 3.0);
    EXPECT_EQ(euclid_dist(a, b), euclid_dist(b, a));
    EXPECT_LE(euclid_dist(a, c), euclid_dist(a, b) + euclid_dist(b, c) + 1e-12);
    EXPECT_GE(euclid_dist(a, b), 0.0);
  }
}

TEST(UnitNormalize, Examples) {
  const Vector x = unit_normalize({2.0, 0.0, 0.0});
  EXPECT_EQ(x, (Vector{1.0, 0.0, 0.0}));
  const Vector y = unit_normalize({1.0, 1.0});
  EXPECT_NEAR(y[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(y[1], 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(UnitNormalize, ZeroIsDegenerate) {
  try {
    unit_normalize({0.0, 0.0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
  EXPECT_THROW(unit_normalize({1e-9, 0.0}), Error);
  EXPECT_NO_THROW(unit_normalize({2e-8, 0.0}));
}

TEST(UnitNormalize, UnitOutputAndIdempotent) {
  SeededRng rng(3);
  for (int t = 0; t < 500; ++t) {
    const Vector z = random_vector(1 + rng.index(20), rng, std::exp(6.0 * rng.uniform() - 3.0));
    const Vector x = unit_normalize(z);
    EXPECT_NEAR(norm(x), 1.0, 1e-12);
    const Vector again = unit_normalize(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(again[i], x[i], 1e-12);
  }
}

TEST(UnitNormalizeJacobian, ClosedFormExamples) {
  const Matrix j1 = unit_normalize_jacobian({1.0, 0.0});
  EXPECT_EQ(j1, Matrix(2, 2, std::vector<double>{0.0, 0.0, 0.0, 1.0}));
  const Matrix j2 = unit_normalize_jacobian({2.0, 0.0});
  EXPECT_EQ(j2, Matrix(2, 2, std::vector<double>{0.0, 0.0, 0.0, 0.5}));
  EXPECT_THROW(unit_normalize_jacobian({0.0, 0.0, 0.0}), Error);
}

TEST(UnitNormalizeJacobian, SymmetricAndTangent) {
  SeededRng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Vector z = random_vector(2 + rng.index(9), rng, 2.0);
    const Matrix j = unit_normalize_jacobian(z);
    for (std::size_t r = 0; r < z.size(); ++r) {
      for (std::size_t c = 0; c < z.size(); ++c) EXPECT_EQ(j(r, c), j(c, r));
    }
    const Vector jz = j * z;
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(jz[i], 0.0, 1e-10);
  }
}

TEST(UnitNormalizeJacobian, MatchesCentralDifferences) {
  SeededRng rng(17);
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    const Vector z = random_vector(5, rng);
    const Vector v = random_vector(5, rng);
    Vector zp = z, zm = z;
    for (std::size_t i = 0; i < 5; ++i) {
      zp[i] += h * v[i];
      zm[i] -= h * v[i];
    }
    const Vector xp = unit_normalize(zp);
    const Vector xm = unit_normalize(zm);
    Vector fd(5);
    for (std::size_t i = 0; i < 5; ++i) fd[i] = (xp[i] - xm[i]) / (2 * h);
    const Vector jv = unit_normalize_jacobian(z) * v;
    const Vector jv_fast = apply_unit_normalize_jacobian(z, v);
    const double rel = euclid_dist(jv, fd) / norm(fd);
    EXPECT_LE(rel, 1e-6);
    EXPECT_LE(euclid_dist(jv, jv_fast), 1e-12 * (1.0 + norm(jv)));
  }
}

TEST(StandardNormal, DeterministicPerSeed) {
  SeededRng a(42), b(42);
  EXPECT_EQ(standard_normal_vector(3, a), standard_normal_vector(3, b));
  EXPECT_THROW(
      {
        SeededRng r(1);
        standard_normal_vector(0, r);
      },
      Error);
}

TEST(StandardNormal, FirstTwoMoments) {
  SeededRng rng(2024);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = standard_normal_vector(1, rng)[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_GT(mean, -0.02);
  EXPECT_LT(mean, 0.02);
  EXPECT_GT(var, 0.98);
  EXPECT_LT(var, 1.02);
}

TEST(SeededRng, DerivedStreamsDiffer) {
  SeededRng a = SeededRng::derive(7, 0);
  SeededRng b = SeededRng::derive(7, 1);
  SeededRng c = SeededRng::derive(7, 0);
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_EQ(x, c.next());
}

TEST(Vector, ZeroDimensionRejected) { EXPECT_THROW(Vector(0), Error); }

TEST(Matrix, ProductMatchesNaiveLoop) {
  SeededRng rng(8);
  for (std::size_t m : {1u, 3u, 17u}) {
    for (std::size_t k : {1u, 5u, 16u}) {
      for (std::size_t n : {1u, 4u, 7u, 8u, 16u, 33u}) {
        Matrix a(m, k), b(k, n), c(m, n);
        for (double& x : a.flat()) x = rng.normal();
        for (double& x : b.flat()) x = rng.normal();
        for (double& x : c.flat()) x = rng.normal();
        Matrix expect = c;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) expect(i, j) += a(i, p) * b(p, j);
          }
        }
        detail::matmul_add(a.flat().data(), b.flat().data(), c.flat().data(), m, k, n);
        for (std::size_t i = 0; i < m * n; ++i) EXPECT_NEAR(c.flat()[i], expect.flat()[i], 1e-12);
      }
    }
  }
}

TEST(Matrix, TransposeRoundTrip) {
  Matrix a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Matrix t = a.transposed();
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_EQ(t.transposed(), a);
}
