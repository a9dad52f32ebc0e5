#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

#include "errors.hpp"

namespace gnclosed {

using cplx = std::complex<double>;

// 1/(1 + x^2) ~ sum_i H_i exp(-tau_i |x|).
struct ExpFitConstants {
  std::array<double, 3> H{-76.70258992199933, 0.22567834335697, 77.47441920490010};
  std::array<double, 3> tau{2.01946250412823, 0.322968123744975, 1.996636590604707};

  double operator()(double x) const {
    const double ax = std::abs(x);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += H[i] * std::exp(-tau[i] * ax);
    return s;
  }
  double sum_h() const { return H[0] + H[1] + H[2]; }
};

struct GuardParams {
  double threshold = 1e-3;  // |z| below this uses the truncated series
  int series_terms = 4;
  double euler_gamma = std::numbers::egamma;
};

namespace detail {

// sum_{k>=1} z^k / (k k!); terms stop changing the sum to double precision.
inline cplx ein_series(cplx z, int max_terms = 4000) {
  cplx term = 1.0, sum = 0.0;
  for (int k = 1; k <= max_terms; ++k) {
    term *= z / static_cast<double>(k);
    const cplx add = term / static_cast<double>(k);
    sum += add;
    if (std::abs(add) <= 1e-17 * std::abs(sum) && static_cast<double>(k) > std::abs(z)) break;
  }
  return sum;
}

// E1 by modified Lentz on the even continued fraction; valid off the negative real axis.
inline cplx e1_continued_fraction(cplx z) {
  constexpr double tiny = 1e-300;
  cplx b = z + 1.0;
  cplx c = 1.0 / tiny;
  cplx d = 1.0 / b;
  cplx h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const cplx del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-z);
}

// The series loses about exp(|z| + Re z) relative to the result.
inline bool e1_use_series(cplx z) { return std::abs(z) <= 1.0 || std::abs(z) + z.real() <= 4.0; }

}  // namespace detail

// Exponential integral E1 on the principal branch; on the negative real axis the value
// from above the cut is returned.
inline cplx expint_e1(cplx z) {
  if (z == 0.0) throw DomainError("E1 is singular at 0");
  if (z.imag() == 0.0 && z.real() < 0.0) z = cplx(z.real(), 0.0);
  if (detail::e1_use_series(z))
    return -std::numbers::egamma - std::log(z) - detail::ein_series(-z);
  return detail::e1_continued_fraction(z);
}

inline int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Ei(z) = -E1(-z) - sgn(arg(-z)) j pi, sgn(0) = 0.
inline cplx expint_ei(cplx z) {
  cplx w = -z;
  if (w.imag() == 0.0) w.imag(0.0);  // drop the signed zero from negation
  const double arg = std::arg(w);
  return -expint_e1(w) - cplx(0.0, sign_of(arg) * std::numbers::pi);
}

// floor((arg z + pi) / 2 pi): nonzero only on the negative real axis.
inline int ei_floor_term(cplx z) {
  return static_cast<int>(std::floor((std::arg(z) + std::numbers::pi) / (2.0 * std::numbers::pi)));
}

// Entire function sum_{k>=1} z^k/(k k!) = Ei(z) - ln z - gamma with the branch terms restored.
inline cplx ein_entire(cplx z) {
  if (z == 0.0) return 0.0;
  if (std::abs(z) <= 1.0 || std::abs(z) - z.real() <= 4.0) return detail::ein_series(z);
  const cplx w = -z;
  return -detail::e1_continued_fraction(w) - std::log(w) - std::numbers::egamma;
}

struct KernelStats {
  std::int64_t evaluations = 0;
  std::int64_t series_hits = 0;
  std::int64_t floor_events = 0;
};

// h(z) with the small-argument series guard.
inline cplx h_term(cplx z, const GuardParams& g, KernelStats* stats = nullptr) {
  if (stats) ++stats->evaluations;
  if (std::abs(z) < g.threshold) {
    if (stats) ++stats->series_hits;
    cplx term = 1.0, sum = 0.0;
    for (int k = 1; k <= g.series_terms; ++k) {
      term *= z / static_cast<double>(k);
      sum += term / static_cast<double>(k);
    }
    return sum;
  }
  if (stats && ei_floor_term(z) != 0) ++stats->floor_events;
  return ein_entire(z);
}

struct KernelParams {
  double B = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
  double K3 = 0.0;
  double K4 = 0.0;
};

enum class KernelKind { Cos, USinUV };  // I1: exp(-B|uv|) cos(.), I2: exp(-B|uv|) uv sin(.)
enum class Branch { Plus, Minus };       // sign of uv on the quadrant

struct HBracket {
  std::array<cplx, 4> z;
  std::array<cplx, 4> h;
  cplx c;
  cplx i;
  cplx value() const { return h[0] - h[1] - h[2] + h[3]; }
};

inline HBracket h_guarded(Branch br, const KernelParams& p, double x, double y, const GuardParams& g,
                          KernelStats* stats = nullptr) {
  if (p.B == 0.0 && p.K1 == 0.0) throw DegenerateKernel("B and K1 both zero");
  HBracket r;
  const double s = br == Branch::Plus ? 1.0 : -1.0;
  r.c = cplx(p.B, -s * p.K1);
  r.i = cplx(p.K1, s * p.B);
  r.z[0] = s * (p.K3 + r.i * x) * (p.K2 + r.i * y) / r.c;
  r.z[1] = s * p.K3 * (p.K2 + r.i * y) / r.c;
  r.z[2] = s * p.K2 * (p.K3 + r.i * x) / r.c;
  r.z[3] = s * p.K2 * p.K3 / r.c;
  for (int k = 0; k < 4; ++k) r.h[k] = h_term(r.z[k], g, stats);
  return r;
}

namespace detail {

// Coefficient P of the h bracket in A = Re[P (h0 - h1 - h2 + h3) + T].
inline cplx bracket_coefficient(KernelKind kind, Branch br, const KernelParams& p) {
  const cplx j(0.0, 1.0);
  const double s = br == Branch::Plus ? 1.0 : -1.0;
  const cplx c(p.B, -s * p.K1), i(p.K1, s * p.B);
  const cplx e = std::exp(j * p.K4 - s * p.K2 * p.K3 / c);
  if (kind == KernelKind::Cos) return -s * e / c;
  if (br == Branch::Plus) return (c - p.K2 * p.K3) / (i * i * i) * e;
  return j * (c + p.K2 * p.K3) / (c * c * c) * e;
}

// Elementary remainder T of the I2 antiderivative; x, y nonzero.
inline cplx elementary_part(Branch br, const KernelParams& p, double x, double y) {
  const cplx j(0.0, 1.0);
  const double s = br == Branch::Plus ? 1.0 : -1.0;
  const cplx c(p.B, -s * p.K1), i(p.K1, s * p.B);
  const cplx c2 = c * c;
  const cplx ax = p.K3 + i * x, ay = p.K2 + i * y;
  cplx t = j * (p.K2 * p.K3 + x * y * c2) *
           std::exp(j * (y * (s * j * p.B * x + p.K1 * x + p.K3) + p.K2 * x + p.K4)) / (c2 * ax * ay);
  t -= j * p.K2 * std::exp(j * (y * p.K3 + p.K4)) / (c2 * ay);
  t -= j * p.K3 * std::exp(j * (x * p.K2 + p.K4)) / (c2 * ax);
  t += j * std::exp(j * p.K4) / c2;
  return t;
}

// h(z) = regular + log_part; log_part = -ln(-z) - gamma when the asymptotic form is used, else 0.
struct HSplit {
  cplx regular;
  cplx log_part;
  bool split = false;
};

inline HSplit h_split(cplx z, const GuardParams& g, KernelStats* stats) {
  if (stats) ++stats->evaluations;
  if (std::abs(z) < g.threshold) {
    if (stats) ++stats->series_hits;
    cplx term = 1.0, sum = 0.0;
    for (int k = 1; k <= g.series_terms; ++k) {
      term *= z / static_cast<double>(k);
      sum += term / static_cast<double>(k);
    }
    return {sum, 0.0, false};
  }
  if (stats && ei_floor_term(z) != 0) ++stats->floor_events;
  if (std::abs(z) <= 1.0 || std::abs(z) - z.real() <= 4.0) return {ein_series(z), 0.0, false};
  const cplx w = -z;
  return {-e1_continued_fraction(w), -std::log(w) - std::numbers::egamma, true};
}

}  // namespace detail

// Antiderivative of the kernel vanishing on both axes; the branch must match sign(xy).
inline double inner_antiderivative(KernelKind kind, Branch br, const KernelParams& p, double x, double y,
                                   const GuardParams& g = {}, KernelStats* stats = nullptr) {
  if (x == 0.0 || y == 0.0) return 0.0;
  const HBracket hb = h_guarded(br, p, x, y, g, stats);
  const cplx P = detail::bracket_coefficient(kind, br, p);
  if (kind == KernelKind::Cos) return std::real(P * hb.value());
  return std::real(P * hb.value() + detail::elementary_part(br, p, x, y));
}

// Kernel integral over [xa, xb] x [ya, yb] inside one quadrant, sign(uv) = s.
// With a = sB - jK1 and G(a) = int int exp(-a uv + j(K2 u + K3 v + K4)) = -(e/a) sum_c +-h(z_c),
// I1 = Re G and I2 = -Im G'(a). Only the corner terms h(z_c) survive the four-corner sum; when every
// corner uses the asymptotic form their logarithms add to an exact multiple of 2 pi j and
// sum_c +-z_c'/z_c vanishes, so far from the axes only exponentially small terms remain.
inline double quadrant_integral(KernelKind kind, Branch br, const KernelParams& p, double xa, double xb, double ya,
                                double yb, const GuardParams& g = {}, KernelStats* stats = nullptr) {
  if (p.B == 0.0 && p.K1 == 0.0) throw DegenerateKernel("B and K1 both zero");
  const cplx j(0.0, 1.0);
  const double s = br == Branch::Plus ? 1.0 : -1.0;
  const cplx a(s * p.B, -p.K1);
  const double k23 = p.K2 * p.K3;
  const cplx e = std::exp(j * p.K4 - k23 / a);
  const std::array<double, 4> xs{xb, xa, xa, xb}, ys{yb, ya, yb, ya}, sg{1.0, 1.0, -1.0, -1.0};
  std::array<cplx, 4> z{}, dz{};
  cplx regular = 0.0, logs = 0.0, raw_logs = 0.0;
  bool all_split = true;
  for (int q = 0; q < 4; ++q) {
    z[q] = (p.K3 + j * a * xs[q]) * (p.K2 + j * a * ys[q]) / a;
    dz[q] = -(k23 / (a * a) + xs[q] * ys[q]);
    const auto h = detail::h_split(z[q], g, stats);
    regular += sg[q] * h.regular;
    logs += sg[q] * h.log_part;
    if (h.split)
      raw_logs += sg[q] * std::log(-z[q]);
    else
      all_split = false;
  }
  if (all_split) {
    const double turns = std::round(raw_logs.imag() / (2.0 * std::numbers::pi));
    logs = cplx(0.0, -2.0 * std::numbers::pi * turns);
  }
  const cplx H = regular + logs;
  if (kind == KernelKind::Cos) return std::real(-e / a * H);

  // e h'(z) z' with h'(z) = (e^z - 1)/z; e e^z is the complex integrand at the corner.
  cplx dH = 0.0;
  for (int q = 0; q < 4; ++q) {
    const cplx corner = std::exp(-a * xs[q] * ys[q] + j * (p.K2 * xs[q] + p.K3 * ys[q] + p.K4));
    cplx t;
    if (all_split) {
      t = corner * dz[q] / z[q];
    } else if (std::abs(z[q]) < 1e-5) {
      t = e * (1.0 + z[q] / 2.0 + z[q] * z[q] / 6.0) * dz[q];
    } else {
      t = (corner - e) / z[q] * dz[q];
    }
    dH += sg[q] * t;
  }
  return std::imag(e / (a * a) * (k23 / a - 1.0) * H + dH / a);
}

struct Rect {
  double x1 = 0.0, x2 = 0.0;
  double y1 = 0.0, y2 = 0.0;
  double area() const { return (x2 - x1) * (y2 - y1); }
};

// Integral of the kernel over a rectangle: split at the axes, four-corner rule per quadrant.
// Throws DegenerateKernel where the closed form is singular or ill-conditioned.
inline double rect_integral(KernelKind kind, const KernelParams& p, const Rect& r, const GuardParams& g = {},
                            KernelStats* stats = nullptr) {
  if (p.B < 0.0) throw DomainError("B must be non-negative");
  if (!(r.x2 >= r.x1) || !(r.y2 >= r.y1)) throw DomainError("rectangle bounds out of order");
  if (p.B == 0.0 && p.K1 == 0.0) {
    if (p.K2 != 0.0 || p.K3 != 0.0) throw DegenerateKernel("B and K1 both zero");
    if (kind == KernelKind::Cos) return r.area() * std::cos(p.K4);
    return std::sin(p.K4) * 0.25 * (r.x2 * r.x2 - r.x1 * r.x1) * (r.y2 * r.y2 - r.y1 * r.y1);
  }
  const double cabs = std::hypot(p.B, p.K1);
  const double xymax = std::max(std::abs(r.x1), std::abs(r.x2)) * std::max(std::abs(r.y1), std::abs(r.y2));
  // I2's constant terms cancel between corners with relative loss ~ 1/|c xy|^2.
  if (kind == KernelKind::USinUV && cabs * xymax < 1e-4) throw DegenerateKernel("|c xy| too small");
  if (std::abs(p.K2 * p.K3) > 20.0 * cabs) throw DegenerateKernel("exp(K2 K3 / c) out of range");

  double xs[3], ys[3];
  int nx = 0, ny = 0;
  xs[nx++] = r.x1;
  if (r.x1 < 0.0 && r.x2 > 0.0) xs[nx++] = 0.0;
  xs[nx++] = r.x2;
  ys[ny++] = r.y1;
  if (r.y1 < 0.0 && r.y2 > 0.0) ys[ny++] = 0.0;
  ys[ny++] = r.y2;

  double total = 0.0;
  for (int a = 0; a + 1 < nx; ++a)
    for (int b = 0; b + 1 < ny; ++b) {
      const double xa = xs[a], xb = xs[a + 1], ya = ys[b], yb = ys[b + 1];
      if (xa == xb || ya == yb) continue;
      const Branch br = (0.5 * (xa + xb)) * (0.5 * (ya + yb)) >= 0.0 ? Branch::Plus : Branch::Minus;
      total += quadrant_integral(kind, br, p, xa, xb, ya, yb, g, stats);
    }
  if (!std::isfinite(total)) throw DegenerateKernel("non-finite kernel value");
  return total;
}

}  // namespace gnclosed
