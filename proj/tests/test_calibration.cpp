#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "treecal/calibration.hpp"
#include "treecal/random.hpp"

namespace {

using namespace treecal;

// Exact rational evaluations (Python fractions) of the calibration map at the
// reported forest extremes, beta = 0.03.
TEST(Calibrate, ReportedExtremesAtThreePercent) {
  EXPECT_NEAR(calibrate(0.984, 0.03), 0.649, 5e-4);
  EXPECT_NEAR(calibrate(0.952, 0.03), 0.373, 5e-4);
  EXPECT_NEAR(calibrate(0.012, 0.03), 3.64e-4, 5e-7);
  EXPECT_NEAR(calibrate(0.030, 0.03), 9.27e-4, 5e-7);
  EXPECT_NEAR(calibrate(0.984, 0.03), 0.648506151142355, 1e-14);
  EXPECT_NEAR(calibrate(0.012, 0.03), 0.0003642397506981262, 1e-17);
}

TEST(Calibrate, IdentityAndEndpoints) {
  for (double p = 0.0; p <= 1.0; p += 0.001) EXPECT_DOUBLE_EQ(calibrate(p, 1.0), p);
  for (double beta : {0.001, 0.03, 0.5}) {
    EXPECT_EQ(calibrate(0.0, beta), 0.0);
    EXPECT_EQ(calibrate(1.0, beta), 1.0);
  }
}

TEST(Calibrate, DomainErrors) {
  EXPECT_THROW(calibrate(-0.01, 0.5), domain_error);
  EXPECT_THROW(calibrate(1.01, 0.5), domain_error);
  EXPECT_THROW(calibrate(0.5, 0.0), domain_error);
  EXPECT_THROW(calibrate(0.5, 1.5), domain_error);
  EXPECT_THROW(calibrate(std::nan(""), 0.5), domain_error);
  EXPECT_THROW(decalibrate(0.5, -1.0), domain_error);
  EXPECT_THROW(adjustment_factor(2.0, 0.5), domain_error);
}

TEST(Decalibrate, InvertsReportedPair) {
  EXPECT_NEAR(decalibrate(0.649, 0.03), 0.984, 5e-4);
  for (double p = 0.0; p <= 1.0; p += 0.01) EXPECT_DOUBLE_EQ(decalibrate(p, 1.0), p);
}

TEST(Decalibrate, RoundTripOnDenseGrid) {
  for (double beta : {0.001, 0.025, 0.03, 0.1, 0.7, 1.0})
    for (int i = 0; i <= 10000; ++i) {
      const double p = i / 10000.0;
      ASSERT_NEAR(calibrate(decalibrate(p, beta), beta), p, 1e-12);
      ASSERT_NEAR(decalibrate(calibrate(p, beta), beta), p, 1e-12);
    }
}

TEST(AdjustmentFactor, EndpointsAndConsistency) {
  EXPECT_EQ(adjustment_factor(0.0, 0.03), 0.03);
  for (double beta : {0.01, 0.3, 1.0}) EXPECT_DOUBLE_EQ(adjustment_factor(1.0, beta), 1.0);
  EXPECT_NEAR(adjustment_factor(0.984, 0.03), 0.659, 5e-4);
  EXPECT_NEAR(adjustment_factor(0.984, 0.03), calibrate(0.984, 0.03) / 0.984, 1e-15);
}

TEST(AdjustmentFactor, FlatNearZeroWithSlopeBetaOneMinusBeta) {
  const double beta = 0.03, h = 1e-6;
  const double slope = (adjustment_factor(h, beta) - adjustment_factor(0.0, beta)) / h;
  EXPECT_NEAR(slope, beta * (1 - beta), 1e-6);
  // Ratio between factors at 0.012 and 0.030 stays within 2% of one.
  EXPECT_NEAR(adjustment_factor(0.030, beta) / adjustment_factor(0.012, beta), 1.0, 0.02);
}

TEST(CalibrationMap, WrapsFreeFunctions) {
  const CalibrationMap map(0.03);
  EXPECT_EQ(map(0.5), calibrate(0.5, 0.03));
  EXPECT_EQ(map.inverse(0.5), decalibrate(0.5, 0.03));
  EXPECT_EQ(map.factor(0.5), adjustment_factor(0.5, 0.03));
  EXPECT_THROW(CalibrationMap(0.0), domain_error);
}

TEST(CalibrateDataset, PrevalenceIsMeanCalibratedValue) {
  const std::vector<double> zeros(10, 0.0);
  EXPECT_EQ(calibrate_dataset(zeros, 0.1).prevalence, 0.0);
  const std::vector<double> two{0.984, 0.012};
  const auto out = calibrate_dataset(two, 0.03);
  EXPECT_NEAR(out.prevalence, (0.649 + 3.64e-4) / 2, 5e-4);
  EXPECT_NEAR(out.prevalence, 0.3247, 5e-4);
  ASSERT_EQ(out.values.size(), 2u);
  EXPECT_EQ(out.values[0], calibrate(0.984, 0.03));
}

TEST(CalibrateDataset, ConstantDecalibratedVectorRecoversTarget) {
  for (double q : {0.001, 0.0208, 0.3}) {
    const std::vector<double> v(100, decalibrate(q, 0.05));
    EXPECT_NEAR(calibrate_dataset(v, 0.05).prevalence, q, 1e-12);
  }
}

TEST(CalibrateDataset, EmptyOrInvalidInput) {
  EXPECT_THROW(calibrate_dataset(std::vector<double>{}, 0.5), domain_error);
  EXPECT_THROW(calibrate_dataset(std::vector<double>{0.2, 1.2}, 0.5), domain_error);
}

// Randomized properties over (p_s, beta).
class CalibrationProperties : public ::testing::Test {
protected:
  Rng rng{20240601};
  double unit() { return rng.uniform(); }
  double rate() { return std::max(1e-4, rng.uniform()); }
};

TEST_F(CalibrationProperties, FactorConsistency) {
  for (int i = 0; i < 100000; ++i) {
    const double p = unit(), b = rate();
    ASSERT_NEAR(calibrate(p, b), p * adjustment_factor(p, b), 1e-12);
  }
}

TEST_F(CalibrationProperties, MonotoneInScoreAndRate) {
  for (int i = 0; i < 50000; ++i) {
    double p1 = unit(), p2 = unit();
    if (p1 == p2) continue;
    if (p1 > p2) std::swap(p1, p2);
    const double b = rate();
    ASSERT_LT(calibrate(p1, b), calibrate(p2, b));
    double b1 = rate(), b2 = rate();
    if (b1 == b2) continue;
    if (b1 > b2) std::swap(b1, b2);
    const double p = std::clamp(unit(), 1e-6, 1 - 1e-6);
    ASSERT_LT(calibrate(p, b1), calibrate(p, b2));
    ASSERT_LE(adjustment_factor(p1, b), adjustment_factor(p2, b));
  }
}

TEST_F(CalibrationProperties, ContractionBelowIdentity) {
  for (int i = 0; i < 50000; ++i) {
    const double p = unit(), b = rate();
    const double c = calibrate(p, b);
    ASSERT_GE(c, 0.0);
    ASSERT_LE(c, p);
    if (b < 1.0 && p > 0.0 && p < 1.0) ASSERT_LT(c, p);
    const double f = adjustment_factor(p, b);
    ASSERT_GE(f, b * (1 - 1e-15));
    ASSERT_LE(f, 1.0);
  }
}

TEST(CalibrationGrid, RatioDistortionGrowsWithScore) {
  for (double beta : {0.01, 0.03, 0.1, 0.5}) {
    for (int i = 1; i < 100; ++i)
      for (int j = i + 1; j < 100; ++j) {
        const double a = i / 100.0, b = j / 100.0;
        ASSERT_GE(calibrate(b, beta) / calibrate(a, beta), (b / a) * (1 - 1e-12));
      }
    // near-equality for tiny scores
    const double a = 1e-6, b = 2e-6;
    EXPECT_NEAR(calibrate(b, beta) / calibrate(a, beta), b / a, 1e-5);
  }
}

} // namespace
