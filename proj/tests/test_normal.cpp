#include <gtest/gtest.h>

#include <cmath>

#include "neco/errors.hpp"
#include "neco/normal.hpp"

using namespace neco;

TEST(Normal, CdfStandardValues) {
  EXPECT_DOUBLE_EQ(standard_normal_cdf(0.0), 0.5);
  EXPECT_NEAR(standard_normal_cdf(1.96), 0.975002104851780, 1e-12);
  EXPECT_NEAR(standard_normal_cdf(3.0), 0.998650101968370, 1e-12);
  EXPECT_NEAR(standard_normal_cdf(-6.0), 9.86587645037698e-10, 1e-20);
  EXPECT_NEAR(standard_normal_cdf(-8.0), 6.22096057427178e-16, 1e-25);
}

TEST(Normal, QuantileStandardValues) {
  EXPECT_NEAR(standard_normal_quantile(0.05), -1.6448536269514722, 1e-9);
  EXPECT_NEAR(standard_normal_quantile(0.01), -2.3263478740408408, 1e-9);
  EXPECT_NEAR(standard_normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(standard_normal_quantile(1e-10), -6.361340902404056, 1e-8);
  EXPECT_DOUBLE_EQ(standard_normal_quantile(0.5), 0.0);
  EXPECT_NEAR(z_alpha(0.05), 1.6448536269514722, 1e-9);
}

TEST(Normal, QuantileRejectsOutsideUnitInterval) {
  EXPECT_THROW(standard_normal_quantile(0.0), DomainError);
  EXPECT_THROW(standard_normal_quantile(1.0), DomainError);
  EXPECT_THROW(standard_normal_quantile(-0.1), DomainError);
  EXPECT_THROW(standard_normal_quantile(std::nan("")), DomainError);
}

TEST(Normal, QuantileInvertsCdf) {
  for (double x = -6.0; x <= 6.0; x += 0.01) EXPECT_NEAR(standard_normal_quantile(standard_normal_cdf(x)), x, 1e-7) << x;
}

TEST(Normal, QuantileIsSymmetric) {
  for (double p : {1e-6, 0.001, 0.02, 0.2, 0.4999}) {
    EXPECT_NEAR(standard_normal_quantile(p), -standard_normal_quantile(1.0 - p), 1e-9 * (1 + std::fabs(standard_normal_quantile(p))));
  }
}

// Reference values from scipy.stats.chi2.sf.
TEST(ChiSquare, SurvivalMatchesReference) {
  struct Case {
    double x, df, sf;
  };
  const Case cases[] = {
      {0.5, 1, 0.47950012218695337},  {3.84, 1, 0.05004352124870519}, {5.99, 1, 0.01438720237400714},
      {0.5, 2, 0.7788007830714049},   {3.84, 2, 0.14660696213035013}, {5.99, 2, 0.05003662708658629},
      {0.5, 6, 0.9978385033102375},   {3.84, 6, 0.6983182820192837},  {5.99, 6, 0.42431122315209036},
  };
  for (const auto& c : cases) EXPECT_NEAR(chi_square_sf(c.x, c.df), c.sf, 1e-10) << c.x << " df " << c.df;
}

TEST(ChiSquare, EdgeCases) {
  EXPECT_DOUBLE_EQ(chi_square_sf(0.0, 3), 1.0);
  EXPECT_LT(chi_square_sf(500.0, 2), 1e-100);
  // df = 2 has the closed form exp(-x/2).
  for (double x : {0.1, 1.0, 7.0, 30.0}) EXPECT_NEAR(chi_square_sf(x, 2), std::exp(-x / 2), 1e-13);
}
