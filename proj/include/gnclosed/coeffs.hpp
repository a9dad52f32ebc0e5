#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "islands.hpp"
#include "link.hpp"
#include "quadrature.hpp"

namespace gnclosed {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kBeta2EffFloor = 1e-33;  // s^2/m

inline double alpha0_bar(const Span& s, const Island& isl, double f) {
  const double f3 = isl.f3_star(f);
  const double v = 0.5 * (s.alpha0(isl.f1_star) + s.alpha0(isl.f2_star) + s.alpha0(f3) - s.alpha0(f));
  if (!(v > 0.0)) throw ConfigError("island-averaged attenuation is not positive");
  return v;
}

struct AlphaFit {
  double alpha1 = 0.0;
  double sigma = 0.0;
  double residual = 0.0;  // max |model - R| / max |R|
  bool moment_fallback = false;
};

// Fits alpha1_bar * exp(-sigma_bar z) to the island-averaged tail of the attenuation.
inline AlphaFit fit_alpha1_sigma(const Span& s, const Island& isl, double f) {
  constexpr int n = 101;
  const double f1 = isl.f1_star, f2 = isl.f2_star, f3 = isl.f3_star(f);
  const double L = s.length;
  auto R = [&](double z) {
    return 0.5 * (s.alpha1(f1) * std::exp(-s.sigma(f1) * z) + s.alpha1(f2) * std::exp(-s.sigma(f2) * z) +
                  s.alpha1(f3) * std::exp(-s.sigma(f3) * z) - s.alpha1(f) * std::exp(-s.sigma(f) * z));
  };
  std::array<double, n> zs{}, rs{};
  double rmax = 0.0;
  bool same_sign = true;
  for (int i = 0; i < n; ++i) {
    zs[i] = L * i / (n - 1);
    rs[i] = R(zs[i]);
    rmax = std::max(rmax, std::abs(rs[i]));
    if (rs[i] * rs[0] <= 0.0) same_sign = false;
  }
  AlphaFit fit;
  double sig_c = s.sigma(0.5 * (f1 + f2));
  if (!(sig_c > 0.0)) sig_c = 1.0 / L;
  if (rmax < 1e-12 * alpha0_bar(s, isl, f)) {
    fit.sigma = sig_c;
    return fit;
  }

  auto residual = [&](double a, double sg) {
    double r = 0.0;
    for (int i = 0; i < n; ++i) r = std::max(r, std::abs(a * std::exp(-sg * zs[i]) - rs[i]));
    return r / rmax;
  };

  double a = 0.0, sg = 0.0;
  bool ok = false;
  if (same_sign) {
    // log-linear least squares, then one Gauss-Newton step on the unweighted misfit
    double sz = 0.0, sy = 0.0, szz = 0.0, szy = 0.0;
    const double sign = rs[0] > 0.0 ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) {
      const double y = std::log(sign * rs[i]);
      sz += zs[i];
      sy += y;
      szz += zs[i] * zs[i];
      szy += zs[i] * y;
    }
    const double slope = (n * szy - sz * sy) / (n * szz - sz * sz);
    a = sign * std::exp((sy - slope * sz) / n);
    sg = -slope;
    Eigen::Matrix2d JtJ = Eigen::Matrix2d::Zero();
    Eigen::Vector2d Jtr = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(-sg * zs[i]);
      const Eigen::Vector2d g(e, -a * zs[i] * e);
      JtJ += g * g.transpose();
      Jtr += g * (rs[i] - a * e);
    }
    const Eigen::Vector2d step = JtJ.ldlt().solve(Jtr);
    if (step.allFinite() && residual(a + step(0), sg + step(1)) <= residual(a, sg)) {
      a += step(0);
      sg += step(1);
    }
    ok = sg > 0.0 && std::isfinite(a) && std::isfinite(sg);
  }
  if (!ok) {
    // moment matching: R(0) and the integral of R over the span
    fit.moment_fallback = true;
    a = rs[0];
    double integral = 0.0;
    for (int i = 0; i + 1 < n; ++i) integral += 0.5 * (rs[i] + rs[i + 1]) * (zs[i + 1] - zs[i]);
    const double target = integral / (a * L);  // (1 - exp(-sL)) / (sL), in (0, 1) for s > 0
    if (a != 0.0 && target > 0.0 && target < 1.0) {
      double lo = 1e-12 / L, hi = 1e4 / L;
      for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double v = -std::expm1(-mid * L) / (mid * L);
        (v > target ? lo : hi) = mid;
      }
      sg = std::sqrt(lo * hi);
    } else {
      sg = sig_c;
    }
  }
  fit.alpha1 = a;
  fit.sigma = sg;
  fit.residual = residual(a, sg);
  return fit;
}

// Combined power factor of the generated and pump fields along the link.
inline double g0(const Link& link, std::size_t ns, const Island& isl, double f) {
  const double f1 = isl.f1_star, f2 = isl.f2_star, f3 = isl.f3_star(f);
  double lg = 0.0;
  for (std::size_t p = 0; p < link.size(); ++p) {
    const Span& sp = link[p];
    if (p >= ns) {
      lg += 0.5 * sp.log_gain(f) - sp.loss_integral(f);
    } else {
      lg += 0.5 * sp.log_gain(f1) - sp.loss_integral(f1);
      lg += 0.5 * sp.log_gain(f2) - sp.loss_integral(f2);
      lg += 0.5 * sp.log_gain(f3) - sp.loss_integral(f3);
    }
  }
  return std::exp(lg);
}

// EDFA phase accumulated by the four-wave-mixing combination before span ns.
inline double theta0(const Link& link, std::size_t ns, const Island& isl, double f) {
  const double f1 = isl.f1_star, f2 = isl.f2_star, f3 = isl.f3_star(f);
  double t = 0.0;
  for (std::size_t p = 0; p < ns; ++p) {
    const Span& sp = link[p];
    t += sp.phase(f1) + sp.phase(f2) - sp.phase(f3) - sp.phase(f);
  }
  return t;
}

inline double phase_offset(const Link& link, std::size_t ns, std::size_t nsp, const Island& isl, double f) {
  return theta0(link, ns, isl, f) - theta0(link, nsp, isl, f);
}

struct DispersionAcc {
  double beta2 = 0.0;   // sum of beta2 L + beta_dcu, s^2
  double beta3 = 0.0;   // sum of beta3 L, s^3
  double beta3c = 0.0;  // sum of beta3 fc L, s^2
};

// Signed accumulation over spans min(ns, nsp) .. max(ns, nsp) - 1; sgn(0) = 1.
inline DispersionAcc dispersion_accumulators(const Link& link, std::size_t ns, std::size_t nsp) {
  DispersionAcc acc;
  const double sgn = ns >= nsp ? 1.0 : -1.0;
  for (std::size_t p = std::min(ns, nsp); p < std::max(ns, nsp); ++p) {
    const Span& sp = link[p];
    acc.beta2 += sp.beta2 * sp.length + sp.beta_dcu;
    acc.beta3 += sp.beta3 * sp.length;
    acc.beta3c += sp.beta3 * sp.fc * sp.length;
  }
  acc.beta2 *= sgn;
  acc.beta3 *= sgn;
  acc.beta3c *= sgn;
  return acc;
}

// Island-averaged dispersion; |result| >= kBeta2EffFloor with the sign preserved, sgn(0) = 1.
inline double beta2_eff(const Span& s, const Island& isl) {
  const double b = s.beta2 + kPi * s.beta3 * (isl.f1_star + isl.f2_star - 2.0 * s.fc);
  const double mag = std::sqrt(b * b + (isl.L1 * isl.L1 + isl.L2 * isl.L2) * kPi * kPi * s.beta3 * s.beta3 / 12.0);
  const double sgn = b >= 0.0 ? 1.0 : -1.0;
  return sgn * std::max(mag, kBeta2EffFloor);
}

struct LorentzWidths {
  double D1 = 0.0;
  double D2 = 0.0;
};

inline LorentzWidths lorentzian_widths(double beta_eff, double a0, double sigma) {
  const double B = 4.0 * kPi * kPi * beta_eff;
  return {B / (2.0 * a0 + sigma), B / (2.0 * a0)};
}

// Bilinear fit K1 xy + K2 x + K3 y + K4 of the coherent phase in closed form.
inline std::array<double, 4> kbar(const DispersionAcc& acc, const Island& isl, double f, double delta_theta) {
  const double x = isl.f1_star - f, y = isl.f2_star - f;
  return {
      4.0 * kPi * kPi * (acc.beta2 + 2.0 * kPi * acc.beta3 * (isl.f1_star + isl.f2_star - f) - 2.0 * kPi * acc.beta3c),
      (kPi * kPi * kPi / 3.0) * acc.beta3 * (isl.L2 * isl.L2 - 12.0 * y * y),
      (kPi * kPi * kPi / 3.0) * acc.beta3 * (isl.L1 * isl.L1 - 12.0 * x * x),
      delta_theta,
  };
}

// Same fit by least squares on the equivalent rectangle, solved in centred, scaled coordinates.
inline std::array<double, 4> kbar_numeric(const DispersionAcc& acc, const Island& isl, double f, double delta_theta) {
  const double xc = isl.f1_star - f, yc = isl.f2_star - f;
  const double L1 = isl.L1, L2 = isl.L2;
  const double k0 = 4.0 * kPi * kPi * (acc.beta2 + 2.0 * kPi * acc.beta3 * f - 2.0 * kPi * acc.beta3c);
  const double k1 = 4.0 * kPi * kPi * kPi * acc.beta3;
  auto target = [&](double x, double y) { return k0 * x * y + k1 * (x * x * y + x * y * y) + delta_theta; };

  const auto& rule = gauss_legendre_rule(8);
  Eigen::Matrix4d G = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double u = 0.5 * rule.nodes[i], v = 0.5 * rule.nodes[j];
      const double w = 0.25 * rule.weights[i] * rule.weights[j];
      const Eigen::Vector4d phi(u * v, u, v, 1.0);
      G += w * phi * phi.transpose();
      rhs += w * phi * target(xc + L1 * u, yc + L2 * v);
    }
  const Eigen::Vector4d c = G.ldlt().solve(rhs);
  const double cuv = c(0), cu = c(1), cv = c(2), c1 = c(3);
  if (L1 == 0.0 || L2 == 0.0) return {k0 + 2.0 * k1 * (xc + yc), 0.0, 0.0, c1};
  const double K1 = cuv / (L1 * L2);
  return {
      K1,
      cu / L1 - K1 * yc,
      cv / L2 - K1 * xc,
      c1 - cu * xc / L1 - cv * yc / L2 + K1 * xc * yc,
  };
}

struct JIncoherent {
  double J1 = 0.0;
  double J2 = 0.0;
};

inline JIncoherent j_incoherent(double a0, double a1, double s) {
  if (a1 == 0.0) return {0.0, 1.0 / (4.0 * a0 * a0)};
  if (s == 0.0) throw ConfigError("sigma_bar is zero with a non-zero alpha1_bar");
  return {
      4.0 * a1 * (2.0 * a0 - a1 + s) / (s * (2.0 * a0 + s) * (2.0 * a0 + s) * (4.0 * a0 + s)),
      (s - 2.0 * a1) * (4.0 * a0 - 2.0 * a1 + s) / (4.0 * a0 * a0 * s * (4.0 * a0 + s)),
  };
}

struct JCoherent {
  std::array<double, 4> Jp{};
  std::array<double, 4> Jpp{};
};

// Partial-fraction weights of 2 Re{xi(ns) xi*(nsp) e^{j phi}}; B = 4 pi^2 beta2_eff per span.
inline JCoherent j_coherent(double B, double a0, double a1, double s, double Bp, double a0p, double a1p, double sp) {
  if (s == 0.0 || sp == 0.0) throw ConfigError("sigma_bar must be positive");
  const double Ja = 2.0 * B * a0p + 2.0 * Bp * a0;
  const double m = B * a0p + Bp * a0;
  if (std::abs(m) <= 1e-12 * (std::abs(B * a0p) + std::abs(Bp * a0)))
    throw DegenerateKernel("opposite dispersion balances between spans");
  const double q1 = Ja - 2.0 * B * a1p + B * sp + Bp * s;
  const double q2 = Ja - 2.0 * Bp * a1 + B * sp + Bp * s;
  const double q3 = Ja - 2.0 * B * a1p + B * sp;
  const double q4 = Ja - 2.0 * Bp * a1 + Bp * s;
  const double d1 = Ja + Bp * s, d2 = Ja + B * sp, d12 = Ja + B * sp + Bp * s;
  JCoherent r;
  r.Jp[0] = 4.0 * B * a1 * q1 / (s * (2.0 * a0 + s) * d1 * d12);
  r.Jp[1] = 4.0 * Bp * a1p * q2 / (sp * (2.0 * a0p + sp) * d2 * d12);
  r.Jp[2] = -B * (2.0 * a1 - s) * q3 / (2.0 * a0 * s * m * d2);
  r.Jp[3] = -Bp * (2.0 * a1p - sp) * q4 / (2.0 * a0p * sp * m * d1);
  r.Jpp[0] = -4.0 * B * B * a1 * q1 / (s * (2.0 * a0 + s) * (2.0 * a0 + s) * d1 * d12);
  r.Jpp[1] = 4.0 * Bp * Bp * a1p * q2 / (sp * (2.0 * a0p + sp) * (2.0 * a0p + sp) * d2 * d12);
  r.Jpp[2] = B * B * (2.0 * a1 - s) * q3 / (4.0 * a0 * a0 * s * m * d2);
  r.Jpp[3] = -Bp * Bp * (2.0 * a1p - sp) * q4 / (4.0 * a0p * a0p * sp * m * d1);
  for (int p = 0; p < 4; ++p)
    if (!std::isfinite(r.Jp[p]) || !std::isfinite(r.Jpp[p])) throw DegenerateKernel("non-finite coherent weight");
  return r;
}

struct SpanCoeffs {
  double gamma = 0.0;
  double alpha0_bar = 0.0;
  AlphaFit fit;
  double g0 = 0.0;
  double theta0 = 0.0;
  double beta2_eff = 0.0;
  double B = 0.0;  // 4 pi^2 beta2_eff
  LorentzWidths D;
  JIncoherent J;
};

struct PairCoeffs {
  std::size_t ns = 0;
  std::size_t nsp = 0;
  DispersionAcc acc;
  double delta_theta = 0.0;
  std::array<double, 4> Dp{};
  std::array<double, 4> K{};          // least-squares values, used by the engine
  std::array<double, 4> K_printed{};  // closed-form values, kept for diagnostics
  JCoherent J;
  bool degenerate = false;
};

inline SpanCoeffs span_coeffs(const Link& link, std::size_t ns, const Island& isl, double f) {
  const Span& s = link[ns];
  SpanCoeffs c;
  c.gamma = s.gamma;
  c.alpha0_bar = alpha0_bar(s, isl, f);
  c.fit = fit_alpha1_sigma(s, isl, f);
  c.g0 = g0(link, ns, isl, f);
  c.theta0 = theta0(link, ns, isl, f);
  c.beta2_eff = beta2_eff(s, isl);
  c.B = 4.0 * kPi * kPi * c.beta2_eff;
  c.D = lorentzian_widths(c.beta2_eff, c.alpha0_bar, c.fit.sigma);
  c.J = j_incoherent(c.alpha0_bar, c.fit.alpha1, c.fit.sigma);
  return c;
}

inline PairCoeffs pair_coeffs(const Link& link, std::size_t ns, std::size_t nsp, const std::vector<SpanCoeffs>& sc,
                              const Island& isl, double f) {
  PairCoeffs p;
  p.ns = ns;
  p.nsp = nsp;
  p.acc = dispersion_accumulators(link, ns, nsp);
  p.delta_theta = sc[ns].theta0 - sc[nsp].theta0;
  p.Dp = {sc[ns].D.D1, sc[nsp].D.D1, sc[ns].D.D2, sc[nsp].D.D2};
  p.K_printed = kbar(p.acc, isl, f, p.delta_theta);
  p.K = kbar_numeric(p.acc, isl, f, p.delta_theta);
  const auto& a = sc[ns];
  const auto& b = sc[nsp];
  try {
    p.J = j_coherent(a.B, a.alpha0_bar, a.fit.alpha1, a.fit.sigma, b.B, b.alpha0_bar, b.fit.alpha1, b.fit.sigma);
  } catch (const DegenerateKernel&) {
    p.degenerate = true;
  }
  return p;
}

// xi(n_s) = 1/u - 2 a1 / (u (u + sigma)), u = 2 a0 - j B x, x = (f1 - f)(f2 - f).
inline std::complex<double> xi_factor(const SpanCoeffs& c, double x) {
  const std::complex<double> u(2.0 * c.alpha0_bar, -c.B * x);
  return 1.0 / u - 2.0 * c.fit.alpha1 / (u * (u + c.fit.sigma));
}

}  // namespace gnclosed
