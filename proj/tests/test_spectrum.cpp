#include <gtest/gtest.h>

#include "gnclosed/spectrum.hpp"
#include "test_support.hpp"

using namespace gnclosed;

TEST(Channel, DerivedQuantities) {
  const Channel c{0, 193.0e12, 193.1e12, 2e-14};
  EXPECT_DOUBLE_EQ(c.bandwidth(), 1e11);
  EXPECT_DOUBLE_EQ(c.center(), 193.05e12);
  EXPECT_DOUBLE_EQ(c.power(), 2e-3);
}

TEST(WdmComb, PsdIsPiecewiseConstantOnHalfOpenIntervals) {
  const WdmComb comb{{{0, 100.0, 200.0, 1.0}, {1, 200.0, 250.0, 3.0}}};
  EXPECT_EQ(comb.psd_at(99.9), 0.0);
  EXPECT_EQ(comb.psd_at(100.0), 1.0);
  EXPECT_EQ(comb.psd_at(199.9), 1.0);
  EXPECT_EQ(comb.psd_at(200.0), 3.0);
  EXPECT_EQ(comb.psd_at(250.0), 0.0);
  EXPECT_DOUBLE_EQ(comb.f_min(), 100.0);
  EXPECT_DOUBLE_EQ(comb.f_max(), 250.0);
  EXPECT_DOUBLE_EQ(comb.total_bandwidth(), 150.0);
}

TEST(WdmComb, ValidCombHasNoIssues) {
  const auto comb = testing_support::uniform_comb(9, 100e9, 100e9, 1e-14);
  EXPECT_TRUE(validate_comb(comb).empty());
  EXPECT_NO_THROW(require_valid(comb));
}

TEST(WdmComb, OverlapIsReportedWithBothIndices) {
  const WdmComb comb{{{0, 0.0, 10.0, 1.0}, {1, 9.0, 20.0, 1.0}}};
  const auto issues = validate_comb(comb);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].kind, CombIssueKind::Overlap);
  EXPECT_EQ(issues[0].first, 0);
  EXPECT_EQ(issues[0].second, 1);
  EXPECT_THROW(require_valid(comb), ConfigError);
}

TEST(WdmComb, DetectsBadBandwidthPsdAndOrder) {
  auto has = [](const std::vector<CombIssue>& v, CombIssueKind k) {
    for (const auto& i : v)
      if (i.kind == k) return true;
    return false;
  };
  EXPECT_TRUE(has(validate_comb({{{0, 5.0, 5.0, 1.0}}}), CombIssueKind::NonPositiveBandwidth));
  EXPECT_TRUE(has(validate_comb({{{0, 0.0, 5.0, -1.0}}}), CombIssueKind::NegativePsd));
  EXPECT_TRUE(has(validate_comb({{{0, 10.0, 20.0, 1.0}, {1, 0.0, 5.0, 1.0}}}), CombIssueKind::Unsorted));
}

TEST(WdmComb, EmptyCombIsRejected) {
  try {
    require_valid(WdmComb{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.pointer(), "/spectrum");
  }
}

TEST(WdmComb, ShiftedBounds) {
  const Channel k{0, 10.0, 30.0, 1.0};
  const auto [lo, hi] = shifted_bounds(k, 5.0);
  EXPECT_EQ(lo, 15.0);
  EXPECT_EQ(hi, 35.0);
}
