#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ambival/riskmeasures.hpp"
#include "ambival/rng.hpp"

using namespace ambival;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  const NormalStream s(seed, stream_id("risk"));
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = s(i);
  return z;
}

}  // namespace

TEST(VaR, OrderStatisticConvention) {
  const std::vector<double> z{-2, -1, 0, 1};
  EXPECT_EQ(var_empirical(z, 0.25), 1.0);
  EXPECT_EQ(var_empirical(std::vector<double>{3.5, 3.5, 3.5}, 0.1), -3.5);
}

TEST(AVaR, ExactTailAverage) {
  const std::vector<double> z{0, 0, 0, -4};
  EXPECT_EQ(avar_empirical(z, 0.25), 4.0);
  EXPECT_EQ(var_empirical(z, 0.25), 0.0);
  // q n = 1.5: top loss plus half of the next one
  const std::vector<double> w{0, -1, -2, -6};
  EXPECT_DOUBLE_EQ(avar_empirical(w, 0.375), (6.0 + 0.5 * 2.0) / 1.5);
}

TEST(RiskMeasures, EmptyAndInvalid) {
  const std::vector<double> none;
  EXPECT_THROW(var_empirical(none, 0.1), std::invalid_argument);
  EXPECT_THROW(avar_empirical(none, 0.1), std::invalid_argument);
  const std::vector<double> z{1.0};
  try {
    var_empirical(z, 1.5);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "level must lie in (0,1)");
  }
  EXPECT_THROW(evaluate({RiskKind::avar, 0.0}, z), std::invalid_argument);
  EXPECT_THROW(var_empirical(std::vector<double>{NAN}, 0.1), std::invalid_argument);
}

TEST(RiskMeasures, GaussianSamples) {
  const auto z = normals(1000000, 11);
  EXPECT_NEAR(var_empirical(z, 0.05), 1.6449, 0.01);
  EXPECT_NEAR(avar_empirical(z, 0.05), 2.0627, 0.02);
}

TEST(RiskMeasures, CashInvarianceMonotonicityNormalization) {
  for (RiskKind kind : {RiskKind::var, RiskKind::avar}) {
    for (double q : {0.01, 0.05, 0.3}) {
      const RiskMeasureSpec rm{kind, q};
      auto z = normals(1001, 3);
      const double base = evaluate(rm, z);
      auto shifted = z;
      for (double& v : shifted) v += 0.75;
      EXPECT_NEAR(evaluate(rm, shifted), base - 0.75, 1e-12);
      auto bigger = z;
      for (std::size_t i = 0; i < bigger.size(); ++i) bigger[i] += std::abs(std::sin(i * 1.0));
      EXPECT_LE(evaluate(rm, bigger), base);
      EXPECT_EQ(evaluate(rm, std::vector<double>(17, 0.0)), 0.0);
      EXPECT_EQ(evaluate(rm, std::vector<double>(9, 2.5)), -2.5);
    }
  }
}

TEST(RiskMeasures, PrudenceOrdering) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto z = normals(50 + seed % 37, seed);
    double prev = -INFINITY;
    for (double q : {0.5, 0.2, 0.1, 0.05, 0.01}) {
      const double v = var_empirical(z, q);
      EXPECT_GE(v, prev);
      EXPECT_GE(avar_empirical(z, q), v - 1e-12);
      prev = v;
    }
  }
}

TEST(RiskMeasures, WeightedMatchesEqualWeights) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto z = normals(3 + seed % 40, seed);
    const std::vector<double> p(z.size(), 1.0 / static_cast<double>(z.size()));
    for (double q : {0.05, 0.25, 0.5, 0.9}) {
      EXPECT_EQ(var_weighted(z, p, q), var_empirical(z, q));
      EXPECT_NEAR(avar_weighted(z, p, q), avar_empirical(z, q), 1e-12);
    }
  }
}

TEST(RiskMeasures, WeightedTwoPoint) {
  const std::vector<double> z{-1.0, 2.0}, p{0.3, 0.7};
  EXPECT_EQ(var_weighted(z, p, 0.2), 1.0);
  EXPECT_EQ(var_weighted(z, p, 0.4), -2.0);
  EXPECT_DOUBLE_EQ(avar_weighted(z, p, 0.5), (0.3 * 1.0 + 0.2 * -2.0) / 0.5);
}

TEST(GaussianC, ClosedForms) {
  EXPECT_NEAR(gaussian_c({RiskKind::var, 0.5}), 0.0, 1e-15);
  EXPECT_NEAR(gaussian_c({RiskKind::var, 0.05}), 1.6449, 1e-4);
  EXPECT_NEAR(gaussian_c({RiskKind::avar, 0.05}), 2.0627, 1e-4);
  EXPECT_EQ(parse_risk_kind("avar"), RiskKind::avar);
  EXPECT_THROW(parse_risk_kind("ES"), std::invalid_argument);
}
