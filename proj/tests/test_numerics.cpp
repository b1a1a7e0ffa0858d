#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dc/error.hpp"
#include "dc/matrix.hpp"
#include "dc/rng.hpp"
#include "dc/whitening.hpp"

using namespace dc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

// Covariance computed with plain loops, independent of dc::covariance.
Matrix naive_covariance(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j) / static_cast<double>(n);
  Matrix c(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
      c(a, b) = s / static_cast<double>(n);
    }
  return c;
}

}  // namespace

TEST(Matrix, ShapeAndAccess) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  m(1, 2) = 4.0;
  EXPECT_EQ(m.row(1)[2], 4.0);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>(3)), std::invalid_argument);
}

TEST(Matrix, MatmulMatchesLoops) {
  const Matrix a = random_matrix(4, 3, 1), b = random_matrix(3, 5, 2);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
  const Matrix ct = matmul_transposed(a, b.transpose());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(ct.values()[i], c.values()[i], 1e-12);
}

TEST(Matrix, SelectAndConcat) {
  const Matrix a = random_matrix(5, 2, 3);
  const std::vector<std::size_t> rows{4, 0};
  const Matrix s = select_rows(a, rows);
  EXPECT_EQ(s(0, 1), a(4, 1));
  EXPECT_EQ(s(1, 0), a(0, 0));
  const std::vector<Matrix> parts{select_rows(a, std::vector<std::size_t>{0, 1}),
                                  select_rows(a, std::vector<std::size_t>{2, 3, 4})};
  EXPECT_EQ(concat_rows(parts), a);
}

TEST(Matrix, RequireFiniteNamesTheMatrix) {
  Matrix m(1, 2);
  m(0, 1) = std::nan("");
  EXPECT_FALSE(all_finite(m.values()));
  try {
    require_finite(m, "widgets");
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("widgets"), std::string::npos);
  }
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs |= x != c.uniform();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, KnownEngineOutput) {
  // std::mt19937_64 with the default seed has a standard-mandated 10000th output.
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng rng(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(11);
  const auto s = sample_without_replacement(rng, 50, 20);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
  for (auto v : s) EXPECT_LT(v, 50u);
  const auto p = random_permutation(rng, 30);
  EXPECT_EQ(std::set<std::size_t>(p.begin(), p.end()).size(), 30u);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(5), b(5);
  (void)a.split(3);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(5, 0), derive_seed(5, 1));
  EXPECT_EQ(derive_seed(5, 1), derive_seed(5, 1));
}

TEST(Eigen, ReconstructsSymmetricMatrix) {
  const Matrix x = random_matrix(30, 5, 4);
  const Matrix a = naive_covariance(x);
  const auto e = symmetric_eigen(a);
  for (std::size_t j = 1; j < e.values.size(); ++j) EXPECT_GE(e.values[j - 1], e.values[j]);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += e.vectors(r, j) * e.values[j] * e.vectors(c, j);
      EXPECT_NEAR(s, a(r, c), 1e-10);
    }
  // Sign convention: largest-magnitude entry of each eigenvector is positive.
  for (std::size_t j = 0; j < 5; ++j) {
    double best = 0.0;
    for (std::size_t r = 0; r < 5; ++r)
      if (std::abs(e.vectors(r, j)) > std::abs(best)) best = e.vectors(r, j);
    EXPECT_GT(best, 0.0);
  }
}

TEST(Whitening, CovarianceMatchesNaive) {
  const Matrix x = random_matrix(40, 4, 5);
  std::vector<double> mean;
  const Matrix c = covariance(x, &mean);
  const Matrix ref = naive_covariance(x);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.values()[i], ref.values()[i], 1e-12);
}

TEST(Whitening, IdentityCovarianceGivesOrthonormalProjection) {
  // Four points at ±1 on each axis have zero mean and identity covariance.
  Matrix x(4, 2, std::vector<double>{1, 1, 1, -1, -1, 1, -1, -1});
  const auto t = fit_whitening(x, 0, 1e-5);
  const double scale = 1.0 / std::sqrt(1.0 + 1e-5);
  const Matrix ptp = matmul(t.projection.transpose(), t.projection);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(ptp(i, j), i == j ? scale * scale : 0.0, 1e-12);
}

TEST(Whitening, DiagonalGaussianBecomesIdentity) {
  Rng rng(6);
  Matrix x(10000, 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.normal(0.0, 2.0);
    x(i, 1) = rng.normal(0.0, 1.0);
  }
  const auto t = fit_whitening(x);
  const Matrix c = naive_covariance(apply_whitening(t, x));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(c(i, j), i == j ? 1.0 : 0.0, 0.05);
  // Independently drawn sample from the same distribution also whitens within 5%.
  Matrix y(10000, 2);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    y(i, 0) = rng.normal(0.0, 2.0);
    y(i, 1) = rng.normal(0.0, 1.0);
  }
  const Matrix cy = naive_covariance(apply_whitening(t, y));
  EXPECT_NEAR(cy(0, 0), 1.0, 0.05);
  EXPECT_NEAR(cy(1, 1), 1.0, 0.05);
}

TEST(Whitening, FittingSampleHasNearIdentityCovariance) {
  const Matrix x = matmul(random_matrix(500, 6, 7), random_matrix(6, 6, 8));
  const double eps = 1e-5;
  const auto t = fit_whitening(x, 0, eps);
  const Matrix c = naive_covariance(apply_whitening(t, x));
  double max_diag = 0.0;
  for (std::size_t i = 0; i < 6; ++i) max_diag = std::max(max_diag, c(i, i));
  for (std::size_t i = 0; i < 6; ++i) {
    const double lambda = t.eigenvalues[i];
    EXPECT_NEAR(c(i, i), lambda / (lambda + eps), 1e-6 * (1.0 / eps) * 1e-3);
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) {
        EXPECT_LE(std::abs(c(i, j)), 1e-6 * max_diag);
      }
  }
}

TEST(Whitening, ReducedDimensionKeepsTopComponents) {
  const Matrix x = random_matrix(100, 5, 9);
  const auto full = fit_whitening(x);
  const auto red = fit_whitening(x, 2);
  EXPECT_EQ(red.output_dim(), 2u);
  EXPECT_EQ(red.eigenvalues.size(), 2u);
  for (std::size_t j = 0; j < red.eigenvalues.size(); ++j) EXPECT_GE(red.eigenvalues[j], full.eigenvalues[j + 2]);
  for (std::size_t j = 1; j < red.eigenvalues.size(); ++j) EXPECT_GE(red.eigenvalues[j - 1], red.eigenvalues[j]);
  EXPECT_THROW(fit_whitening(x, 6), std::invalid_argument);
}

TEST(Whitening, DefaultPcaDimensionFitsWideFeatures) {
  // 256 output dimensions from 4096-dim inputs is a valid configuration shape.
  WhiteningTransform t;
  t.projection = Matrix(4096, 256);
  EXPECT_EQ(t.input_dim(), 4096u);
  EXPECT_EQ(t.output_dim(), 256u);
}

TEST(Whitening, MeanMapsToZeroAndConstantDataToZero) {
  const Matrix x = random_matrix(20, 3, 10);
  const auto t = fit_whitening(x);
  Matrix m(1, 3, std::vector<double>(t.mean));
  const Matrix centered = apply_whitening(t, m);
  for (double v : centered.values()) EXPECT_NEAR(v, 0.0, 1e-12);

  Matrix dup(5, 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) dup(i, j) = x(0, j);
  const Matrix far = apply_whitening(t, dup);
  for (double v : far.values()) EXPECT_TRUE(std::isfinite(v));
  // Constant data about its own mean maps to zero.
  WhiteningTransform own = t;
  own.mean.assign(x.row(0).begin(), x.row(0).end());
  const Matrix zero = apply_whitening(own, dup);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(Whitening, Errors) {
  EXPECT_THROW(fit_whitening(Matrix(1, 3)), std::invalid_argument);
  EXPECT_THROW(fit_whitening(random_matrix(5, 2, 1), 0, 0.0), std::invalid_argument);
  Matrix constant(6, 2, 3.0);
  try {
    fit_whitening(constant);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("constant"), std::string::npos);
  }
  const auto t = fit_whitening(random_matrix(10, 3, 2));
  EXPECT_THROW(apply_whitening(t, Matrix(2, 4)), std::invalid_argument);
}

TEST(L2Normalize, Examples) {
  Matrix m(3, 2, std::vector<double>{3, 4, 0, 0, 0.6, 0.8});
  const Matrix n = l2_normalize_rows(m);
  EXPECT_DOUBLE_EQ(n(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.8);
  EXPECT_EQ(n(1, 0), 0.0);
  EXPECT_EQ(n(1, 1), 0.0);
  EXPECT_NEAR(n(2, 0), 0.6, 1e-15);
  EXPECT_NEAR(n(2, 1), 0.8, 1e-15);
}

TEST(L2Normalize, RandomRowsHaveUnitNormAndIdempotent) {
  const Matrix x = random_matrix(50, 7, 12);
  const Matrix n = l2_normalize_rows(x);
  for (std::size_t i = 0; i < n.rows(); ++i) {
    double s = 0.0;
    for (double v : n.row(i)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
  const Matrix nn = l2_normalize_rows(n);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(nn.values()[i], n.values()[i], 1e-15);
}
