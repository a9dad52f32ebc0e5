#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gnclosed/specialfn.hpp"
#include "test_support.hpp"

using namespace gnclosed;

namespace {

struct ComplexRef {
  double re, im, vre, vim;
};

// High-precision reference values (30-digit arithmetic).
const ComplexRef kE1Refs[] = {
    {1.0, 0.0, 0.21938393439552027, 0.0},
    {-1.0, 0.0, -1.8951178163559368, -3.1415926535897932},
    {0.5, 0.0, 0.55977359477616081, 0.0},
    {2.5, 1.0, 0.0061979443119870371, -0.02285278366901248},
    {-3.0, 0.5, -9.3836035093309434, 0.12921297008462977},
    {-0.2, -4.0, 0.18376805293036231, -0.22247408214630751},
    {12.0, 3.0, -4.60856378902619e-7, 4.0329915890915862e-8},
    {-15.0, 20.0, -131430.01566179503, 25110.666476594237},
    {0.0005, 0.0001, 7.0045763780700194, -0.19729558484577015},
    {0.0, 30.0, 0.033032417282071144, -0.0040397867645455082},
    {-8.0, -0.001, -440.37973651370933, 2.7689729537277716},
    {0.3, 7.0, -0.052951280712029899, -0.087806755464118074},
};

const ComplexRef kEinRefs[] = {
    {3.0, 0.0, 8.258004617055774, 0.0},
    {20.0, 0.0, 25615649.09110865, 0.0},
    {-20.0, 0.0, -3.5729479385538791, 0.0},
    {-6.0, 9.0, -2.9581111934088776, 0.98289627567396485},
    {40.0, -3.0, -5878707221235925.8, -1305173387548338.7},
    {0.01, -0.02, 0.0099243881665826472, -0.02009988638256582},
    {-50.0, 5.0, -4.494213835756263, 0.099668652491162027},
    {2.0, 30.0, -4.222182374608322, 1.5913624262965991},
};

double kernel(KernelKind kind, const KernelParams& p, double u, double v) {
  const double ph = p.K1 * u * v + p.K2 * u + p.K3 * v + p.K4;
  const double w = std::exp(-p.B * std::abs(u * v));
  return kind == KernelKind::Cos ? w * std::cos(ph) : w * u * v * std::sin(ph);
}

}  // namespace

TEST(ExpFit, ValueAtZeroAndMaxError) {
  const ExpFitConstants fit;
  EXPECT_NEAR(fit(0.0), 0.99751, 1e-5);
  EXPECT_NEAR(fit.sum_h(), fit(0.0), 1e-15);
  double worst = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double x = 100.0 * i / 100000.0;
    worst = std::max(worst, std::abs(fit(x) - 1.0 / (1.0 + x * x)));
  }
  EXPECT_LE(worst, 0.01);
  EXPECT_EQ(fit(-2.5), fit(2.5));
}

TEST(GuardParams, Defaults) {
  const GuardParams g;
  EXPECT_EQ(g.threshold, 1e-3);
  EXPECT_EQ(g.series_terms, 4);
  EXPECT_NEAR(g.euler_gamma, 0.577215665, 1e-9);
}

TEST(ExpInt, E1MatchesReferenceValues) {
  for (const auto& r : kE1Refs) {
    const cplx v = expint_e1({r.re, r.im});
    const cplx ref(r.vre, r.vim);
    EXPECT_LE(std::abs(v - ref), 1e-13 * std::abs(ref)) << r.re << "+" << r.im << "j";
  }
}

TEST(ExpInt, SeriesAndContinuedFractionAgreeOnOverlap) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rad(2.0, 6.0), ang(-2.6, 2.6);
  for (int i = 0; i < 200; ++i) {
    const cplx z = std::polar(rad(rng), ang(rng));
    const cplx s = -std::numbers::egamma - std::log(z) - detail::ein_series(-z);
    const cplx c = detail::e1_continued_fraction(z);
    // The series loses exp(|z| + Re z) relative digits; allow for it.
    const double tol = 1e-14 * std::exp(std::abs(z) + z.real());
    EXPECT_LE(std::abs(s - c), tol * std::abs(c)) << z;
  }
}

TEST(ExpInt, EiAtOneAndMinusOne) {
  EXPECT_NEAR(expint_ei(1.0).real(), 1.8951178163559368, 1e-13);
  EXPECT_NEAR(expint_ei(1.0).imag(), 0.0, 1e-15);
  EXPECT_NEAR(expint_ei(-1.0).real(), -0.21938393439552026, 1e-13);
  EXPECT_NEAR(expint_ei(-1.0).imag(), 0.0, 1e-15);
}

TEST(ExpInt, EiRealAxisMatchesSeries) {
  for (int i = -50; i <= 50; ++i) {
    if (i == 0) continue;
    const double z = 0.1 * i;
    long double term = 1.0L, sum = 0.0L;
    for (int k = 1; k < 80; ++k) {
      term *= static_cast<long double>(z) / k;
      sum += term / k;
    }
    const double expected = static_cast<double>(std::numbers::egamma + std::log(std::abs(z)) + sum);
    EXPECT_NEAR(expint_ei(z).real(), expected, 1e-10) << z;
  }
}

TEST(ExpInt, FloorTermOnlyOnNegativeAxis) {
  EXPECT_EQ(ei_floor_term({-2.0, 0.0}), 1);
  EXPECT_EQ(ei_floor_term({-2.0, 1e-3}), 0);
  EXPECT_EQ(ei_floor_term({-2.0, -1e-3}), 0);
  EXPECT_EQ(ei_floor_term({3.0, 0.0}), 0);
}

TEST(ExpInt, EntirePartMatchesReference) {
  for (const auto& r : kEinRefs) {
    const cplx v = ein_entire({r.re, r.im});
    const cplx ref(r.vre, r.vim);
    EXPECT_LE(std::abs(v - ref), 1e-12 * std::abs(ref)) << r.re << "+" << r.im << "j";
  }
}

TEST(ExpInt, EntirePartEqualsEiMinusLogOffAxis) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-8.0, 8.0);
  for (int i = 0; i < 100; ++i) {
    const cplx z(d(rng), d(rng));
    const cplx direct = expint_ei(z) - std::log(z) - std::numbers::egamma;
    // Off the cuts the branch terms of Ei and log cancel except for +-j pi.
    cplx diff = ein_entire(z) - direct;
    diff -= cplx(0.0, std::round(diff.imag() / std::numbers::pi) * std::numbers::pi);
    EXPECT_LE(std::abs(diff), 1e-11 * (1.0 + std::abs(direct))) << z;
  }
}

TEST(HGuarded, ContinuousAtThreshold) {
  const GuardParams g;
  for (int i = 0; i < 32; ++i) {
    const double a = -std::numbers::pi + 2.0 * std::numbers::pi * i / 32.0;
    const cplx below = std::polar(g.threshold * (1.0 - 1e-12), a);
    const cplx above = std::polar(g.threshold * (1.0 + 1e-12), a);
    EXPECT_LE(std::abs(h_term(below, g) - h_term(above, g)), 2e-12) << a;
  }
}

TEST(HGuarded, DegenerateWhenBAndK1Vanish) {
  const KernelParams p{0.0, 0.0, 0.3, 0.2, 0.0};
  EXPECT_THROW(h_guarded(Branch::Plus, p, 1.0, 1.0, GuardParams{}), DegenerateKernel);
  EXPECT_THROW(rect_integral(KernelKind::Cos, p, {0.0, 1.0, 0.0, 1.0}), DegenerateKernel);
}

TEST(InnerAntiderivative, VanishesOnAxes) {
  const KernelParams p{0.7, 0.4, 0.2, -0.3, 1.1};
  for (auto kind : {KernelKind::Cos, KernelKind::USinUV}) {
    EXPECT_EQ(inner_antiderivative(kind, Branch::Plus, p, 0.0, 1.3), 0.0);
    EXPECT_EQ(inner_antiderivative(kind, Branch::Minus, p, -1.2, 0.0), 0.0);
  }
}

TEST(InnerAntiderivative, MixedPartialIsIntegrand) {
  const KernelParams p{0.9, -0.6, 0.35, 0.25, 0.4};
  const double h = 1e-3;
  for (auto kind : {KernelKind::Cos, KernelKind::USinUV}) {
    for (auto [x, y] : {std::pair{0.8, 1.1}, std::pair{-0.9, 0.7}, std::pair{1.4, -0.5}, std::pair{-1.2, -1.3}}) {
      const Branch br = x * y >= 0 ? Branch::Plus : Branch::Minus;
      auto A = [&](double a, double b) { return inner_antiderivative(kind, br, p, a, b); };
      const double d2 = (A(x + h, y + h) - A(x + h, y - h) - A(x - h, y + h) + A(x - h, y - h)) / (4 * h * h);
      EXPECT_NEAR(d2, kernel(kind, p, x, y), 1e-5);
    }
  }
}

TEST(RectIntegral, MatchesAdaptiveQuadrature) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ub(0.05, 3.0), uk(-2.0, 2.0), uk4(-3.0, 3.0), ux(-2.5, 2.5);
  for (int t = 0; t < 20; ++t) {
    const KernelParams p{ub(rng), uk(rng), 0.5 * uk(rng), 0.5 * uk(rng), uk4(rng)};
    double x1 = ux(rng), x2 = ux(rng), y1 = ux(rng), y2 = ux(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    for (auto kind : {KernelKind::Cos, KernelKind::USinUV}) {
      const double closed = rect_integral(kind, p, {x1, x2, y1, y2});
      const double num = testing_support::adaptive_2d([&](double u, double v) { return kernel(kind, p, u, v); },
                                                      x1, x2, y1, y2);
      const double l1 = testing_support::adaptive_2d(
          [&](double u, double v) { return std::abs(kernel(kind, p, u, v)); }, x1, x2, y1, y2, 1e-8);
      EXPECT_LE(std::abs(closed - num), 1e-9 * std::max(l1, 1e-300)) << t;
    }
  }
}

TEST(RectIntegral, TrivialKernel) {
  const KernelParams p{};
  EXPECT_DOUBLE_EQ(rect_integral(KernelKind::Cos, p, {-1.0, 2.0, 0.5, 1.5}), 3.0);
  EXPECT_EQ(rect_integral(KernelKind::USinUV, p, {-1.0, 2.0, 0.5, 1.5}), 0.0);
}

TEST(RectIntegral, TransposeSymmetry) {
  const KernelParams p{0.8, 0.3, 0.45, -0.2, 0.7};
  const KernelParams q{p.B, p.K1, p.K3, p.K2, p.K4};
  for (auto kind : {KernelKind::Cos, KernelKind::USinUV}) {
    const double a = rect_integral(kind, p, {-0.4, 1.7, 0.2, 2.1});
    const double b = rect_integral(kind, q, {0.2, 2.1, -0.4, 1.7});
    EXPECT_NEAR(a, b, 1e-13 * std::abs(a));
  }
}

TEST(RectIntegral, SmallProductCornersUseSeries) {
  KernelStats stats;
  const KernelParams p{1.0, 0.5, 0.0, 0.0, 0.3};
  const double v = rect_integral(KernelKind::Cos, p, {1e-4, 1.0, 1e-4, 1.0}, GuardParams{}, &stats);
  EXPECT_GT(stats.series_hits, 0);
  const double num = testing_support::adaptive_2d(
      [&](double u, double w) { return kernel(KernelKind::Cos, p, u, w); }, 1e-4, 1.0, 1e-4, 1.0);
  EXPECT_NEAR(v, num, 1e-10);
}
