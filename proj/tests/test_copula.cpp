#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "neco/copula.hpp"

using namespace neco;

namespace {

ReturnPanel panel_from(const Matrix& values) {
  ReturnPanel p;
  for (Eigen::Index j = 0; j < values.cols(); ++j) p.instruments.push_back("X" + std::to_string(j));
  for (Eigen::Index t = 0; t < values.rows(); ++t) p.times.push_back(synthetic_date(static_cast<int>(t)));
  p.values = values;
  return p;
}

// Random panel whose columns mix continuous draws and heavy ties.
Matrix random_values(std::mt19937_64& rng, int n, int p) {
  std::normal_distribution<double> norm;
  std::exponential_distribution<double> expo(2.0);
  std::uniform_int_distribution<int> small(0, 4);
  std::uniform_int_distribution<int> kind(0, 2);
  Matrix x(n, p);
  for (int j = 0; j < p; ++j) {
    const int k = kind(rng);
    for (int t = 0; t < n; ++t) x(t, j) = k == 0 ? norm(rng) : k == 1 ? expo(rng) - 0.5 : small(rng) * 0.25;
  }
  return x;
}

}  // namespace

TEST(Copula, AdjustedEcdfExamples) {
  const std::vector<double> s{1, 2, 3};
  const auto m = fit_marginal(s);
  EXPECT_DOUBLE_EQ(m(2.0), 0.625);
  EXPECT_DOUBLE_EQ(m(0.0), 0.125);
  EXPECT_GT(m(-1e300), 0.0);
  const std::vector<double> nine{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_DOUBLE_EQ(fit_marginal(nine)(9.0), 0.95);
  EXPECT_LT(fit_marginal(nine)(1e300), 1.0);
}

TEST(Copula, FitRejectsBadSamples) {
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN(), 2.0};
  EXPECT_THROW(fit_marginal(bad), InvalidSample);
  const std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
  EXPECT_THROW(fit_marginal(inf), InvalidSample);
  const std::vector<double> one{1.0};
  EXPECT_THROW(fit_marginal(one), InvalidSample);
}

TEST(Copula, QuantileExamples) {
  const std::vector<double> s{1, 2, 3};
  const auto m = fit_marginal(s);
  EXPECT_DOUBLE_EQ(marginal_quantile(m, 0.625), 2.0);
  const std::vector<double> up_to_7{3, 7, -1, 0, 2};
  EXPECT_DOUBLE_EQ(marginal_quantile(fit_marginal(up_to_7), 0.999), 7.0);
  EXPECT_DOUBLE_EQ(marginal_quantile(fit_marginal(up_to_7), 1e-9), -1.0);
  // Halfway between the plotting positions of 1 and 2.
  EXPECT_DOUBLE_EQ(marginal_quantile(m, 0.5), 1.5);
  EXPECT_THROW(marginal_quantile(m, 0.0), DomainError);
  EXPECT_THROW(marginal_quantile(m, 1.0), DomainError);
}

TEST(Copula, QuantileIsMonotone) {
  std::mt19937_64 rng(1);
  const Matrix x = random_values(rng, 57, 3);
  for (int j = 0; j < 3; ++j) {
    const auto m = fit_marginal(Vector(x.col(j)));
    double prev = -std::numeric_limits<double>::infinity();
    for (double u = 0.001; u < 1.0; u += 0.001) {
      const double q = m.quantile(u);
      EXPECT_GE(q, prev);
      prev = q;
    }
  }
}

TEST(Copula, LatentOfThreeObservations) {
  Matrix x(3, 1);
  x << 5.0, -1.0, 2.0;
  const auto tr = to_latent(panel_from(x));
  EXPECT_NEAR(tr.latent.values(1, 0), standard_normal_quantile(1.5 / 4), 1e-15);
  EXPECT_NEAR(tr.latent.values(2, 0), standard_normal_quantile(2.5 / 4), 1e-15);
  EXPECT_NEAR(tr.latent.values(0, 0), standard_normal_quantile(3.5 / 4), 1e-15);
}

TEST(Copula, GaussianColumnNearlyUnchanged) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Matrix x(100000, 1);
  for (Eigen::Index t = 0; t < x.rows(); ++t) x(t, 0) = n(rng);
  const auto z = to_latent(panel_from(x)).latent.values;
  const Vector a = x.col(0).array() - x.col(0).mean();
  const Vector b = z.col(0).array() - z.col(0).mean();
  EXPECT_GE(a.dot(b) / (a.norm() * b.norm()), 0.999);
}

TEST(Copula, LatentColumnsAreStandardised) {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> e(1.0);
  const int N = 20000;
  Matrix x(N, 2);
  for (int t = 0; t < N; ++t) {
    x(t, 0) = e(rng);
    x(t, 1) = -std::log(e(rng));
  }
  const auto z = to_latent(panel_from(x)).latent.values;
  for (int j = 0; j < 2; ++j) {
    const double mean = z.col(j).mean();
    const double var = (z.col(j).array() - mean).square().sum() / (N - 1);
    EXPECT_LT(std::fabs(mean), 5.0 / std::sqrt(N));
    EXPECT_LT(std::fabs(var - 1.0), 5.0 / std::sqrt(N));
  }
}

// Property over 1000 random panels: rank preservation, the latent bound and
// the exact round trip through the marginal quantile at sample points.
TEST(CopulaProperty, RoundTripRanksAndBounds) {
  std::mt19937_64 rng(20240607);
  std::uniform_int_distribution<int> len(2, 300);
  std::uniform_int_distribution<int> width(1, 4);
  for (int c = 0; c < 1000; ++c) {
    const int n = len(rng), p = width(rng);
    const Matrix x = random_values(rng, n, p);
    const auto tr = to_latent(panel_from(x));
    const Matrix& z = tr.latent.values;
    ASSERT_TRUE(z.allFinite());
    const Matrix back = from_latent(tr.marginals, z);
    for (int j = 0; j < p; ++j) {
      const double bound = tr.marginals[static_cast<std::size_t>(j)].latent_bound();
      for (int t = 0; t < n; ++t) {
        ASSERT_LE(std::fabs(z(t, j)), bound + 1e-12);
        ASSERT_EQ(back(t, j), x(t, j)) << "case " << c << " t " << t << " col " << j;
        for (int s = 0; s < n; s += std::max(1, n / 17)) {
          ASSERT_EQ(x(t, j) < x(s, j), z(t, j) < z(s, j));
          ASSERT_EQ(x(t, j) == x(s, j), z(t, j) == z(s, j));
        }
      }
    }
  }
}

TEST(Copula, ApplyMarginalsOutOfSample) {
  Matrix train(4, 1);
  train << 1, 2, 3, 4;
  const auto tr = to_latent(panel_from(train));
  Matrix test(2, 1);
  test << 100.0, -100.0;
  const Matrix z = apply_marginals(tr.marginals, test);
  EXPECT_NEAR(z(0, 0), standard_normal_quantile(4.5 / 5), 1e-15);
  EXPECT_NEAR(z(1, 0), standard_normal_quantile(0.5 / 5), 1e-15);
}
