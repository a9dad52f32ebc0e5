#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "engine.hpp"
#include "islands.hpp"
#include "link.hpp"
#include "quadrature.hpp"
#include "spectrum.hpp"

namespace gnclosed {

enum class ZRule { Filon, GaussLegendre };

struct QuadratureSpec {
  double rel_tol = 1e-5;
  unsigned max_depth = 18;  // bisection levels per adaptive integral
  int z_steps = 64;         // minimum panels per span for the z-integral
  ZRule z_rule = ZRule::Filon;
  int threads = 1;
  // Panels are graded geometrically toward the f1 = f and f2 = f ridges down to min_panel_hz and
  // never exceed max_panel_hz; Gauss-Kronrod error estimates are unreliable on an unresolved ridge.
  double min_panel_hz = 1e6;
  double max_panel_hz = 5e9;
};

inline void validate_quadrature(const QuadratureSpec& q) {
  if (!(q.rel_tol > 0.0)) throw ConfigError("rel_tol must be positive", "/quadrature/rel_tol");
  if (q.z_steps < 64) throw ConfigError("z_steps must be at least 64", "/quadrature/z_steps");
  if (q.max_depth < 1) throw ConfigError("max_depth must be at least 1", "/quadrature/max_depth");
  if (!(q.min_panel_hz > 0.0) || !(q.max_panel_hz > q.min_panel_hz))
    throw ConfigError("panel widths must satisfy 0 < min < max", "/quadrature");
}

namespace detail {

// M_k(w) = int_0^1 t^k e^{w t} dt for k = 0..4.
inline std::array<std::complex<double>, 5> exp_moments(std::complex<double> w) {
  std::array<std::complex<double>, 5> M{};
  if (std::abs(w) <= 4.0) {
    std::complex<double> term = 1.0;
    for (int j = 0; j < 80; ++j) {
      if (j > 0) term *= w / static_cast<double>(j);
      for (int k = 0; k < 5; ++k) M[k] += term / static_cast<double>(j + k + 1);
      if (std::abs(term) < 1e-18 && j > 4) break;
    }
    return M;
  }
  const std::complex<double> ew = std::exp(w);
  M[0] = (ew - 1.0) / w;
  for (int k = 1; k < 5; ++k) M[k] = (ew - static_cast<double>(k) * M[k - 1]) / w;
  return M;
}

// Monomial coefficients of the quartic through t = 0, 1/4, 1/2, 3/4, 1.
inline const Eigen::Matrix<double, 5, 5>& filon_vandermonde_inverse() {
  static const Eigen::Matrix<double, 5, 5> inv = [] {
    Eigen::Matrix<double, 5, 5> V;
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 5; ++k) V(i, k) = std::pow(0.25 * i, k);
    return Eigen::Matrix<double, 5, 5>(V.inverse());
  }();
  return inv;
}

}  // namespace detail

// int_0^L exp(u z + r(z)) dz with r smooth: quartic Filon panels, exact in the exponential factor.
template <class R>
std::complex<double> filon_exp_integral(std::complex<double> u, R&& r, double L, int panels) {
  const auto& inv = detail::filon_vandermonde_inverse();
  const double h = L / panels;
  std::complex<double> sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * h;
    Eigen::Matrix<double, 5, 1> g;
    for (int i = 0; i < 5; ++i) g(i) = std::exp(r(a + 0.25 * i * h));
    const Eigen::Matrix<double, 5, 1> c = inv * g;
    const auto M = detail::exp_moments(u * h);
    std::complex<double> panel = 0.0;
    for (int k = 0; k < 5; ++k) panel += c(k) * M[k];
    sum += std::exp(u * a) * h * panel;
  }
  return sum;
}

// Exact link function of a multi-span link; output frequency f = f1 + f2 - f3.
inline std::complex<double> lk_numeric(const Link& link, double f1, double f2, double f3, const QuadratureSpec& q = {}) {
  const double f = f1 + f2 - f3;
  const std::array<double, 4> fr{f1, f2, f3, f};
  const std::array<double, 4> sg{1.0, 1.0, 1.0, -1.0};
  const std::size_t ns = link.size();

  // Per-span log amplitude and phase of the field factors.
  auto field_log = [&](const Span& sp, double nu) {
    const double phi = sp.phase(nu) - beta_phase(sp, nu) * sp.length - dcu_phase(sp, nu);
    return std::complex<double>(0.5 * sp.log_gain(nu) - sp.loss_integral(nu), phi);
  };

  // lt_s = sum_{p<s} pump factors + sum_{p>=s} generated-field factors
  std::vector<std::complex<double>> lt(ns + 1, 0.0);
  {
    std::complex<double> tail = 0.0;
    std::vector<std::complex<double>> suffix(ns + 1, 0.0);
    for (std::size_t p = ns; p-- > 0;) suffix[p] = suffix[p + 1] + field_log(link[p], f);
    for (std::size_t p = 0; p < ns; ++p) {
      lt[p] = tail + suffix[p];
      tail += field_log(link[p], f1) + field_log(link[p], f2) + std::conj(field_log(link[p], f3));
    }
  }

  std::complex<double> total = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    const Span& sp = link[s];
    if (sp.gamma == 0.0) continue;
    double a0sum = 0.0, dbeta = 0.0, sigma_max = 0.0;
    bool has_alpha1 = false;
    for (int i = 0; i < 4; ++i) {
      a0sum += sg[i] * sp.alpha0(fr[i]);
      dbeta += (i == 2 ? -1.0 : sg[i]) * beta_phase(sp, fr[i]);
      if (sp.alpha1(fr[i]) != 0.0) has_alpha1 = true;
      sigma_max = std::max(sigma_max, sp.sigma(fr[i]));
    }
    // exponent of the generated-field integrand: -sum(+-alpha0) z - j dbeta z + r(z)
    const std::complex<double> u(-a0sum, -dbeta);
    const double L = sp.length;
    std::complex<double> inner;
    if (!has_alpha1) {
      inner = (std::exp(u * L) - 1.0) / u;
    } else {
      auto r = [&](double z) {
        double v = 0.0;
        for (int i = 0; i < 4; ++i) {
          const double a1 = sp.alpha1(fr[i]), sgm = sp.sigma(fr[i]);
          v -= sg[i] * a1 * (sgm == 0.0 ? z : -std::expm1(-sgm * z) / sgm);
        }
        return v;
      };
      if (q.z_rule == ZRule::Filon) {
        const int panels = std::max(q.z_steps, static_cast<int>(std::ceil(8.0 * sigma_max * L)));
        inner = filon_exp_integral(u, r, L, panels);
      } else {
        const double cycles = (std::abs(dbeta) + std::abs(a0sum) + sigma_max) * L;
        const int panels = std::max(q.z_steps, static_cast<int>(std::ceil(cycles / 2.0)));
        const auto& rule = gauss_legendre_rule(8);
        const double h = L / panels;
        inner = 0.0;
        for (int p = 0; p < panels; ++p)
          for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double z = (p + 0.5) * h + 0.5 * h * rule.nodes[i];
            inner += 0.5 * h * rule.weights[i] * std::exp(u * z + r(z));
          }
      }
    }

    total += sp.gamma * inner * std::exp(lt[s]);
  }
  return std::complex<double>(0.0, -1.0) * total;
}

struct IntegralEstimate {
  double value = 0.0;
  double error_bound = 0.0;
};

namespace detail {

// Panel edges on [a, b]: the cuts, geometric grading toward `ridge`, and a maximum width.
inline std::vector<double> panel_edges(double a, double b, std::initializer_list<double> cuts, double ridge,
                                       const QuadratureSpec& q) {
  std::vector<double> pts{a, b};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  if (ridge > a && ridge < b) pts.push_back(ridge);
  for (double d = std::max(ridge - a, b - ridge); d > q.min_panel_hz; d *= 0.5) {
    for (double c : {ridge - d, ridge + d})
      if (c > a && c < b) pts.push_back(c);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> out{pts.front()};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double w = pts[i] - pts[i - 1];
    const int parts = static_cast<int>(std::ceil(w / q.max_panel_hz));
    for (int j = 1; j < parts; ++j) out.push_back(pts[i - 1] + w * j / parts);
    out.push_back(pts[i]);
  }
  return out;
}

template <class F>
IntegralEstimate gk_piecewise(F&& fn, const std::vector<double>& pts, const QuadratureSpec& q) {
  using boost::math::quadrature::gauss_kronrod;
  IntegralEstimate r;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    r.value += gauss_kronrod<double, 15>::integrate(fn, pts[i], pts[i + 1], q.max_depth, q.rel_tol, &err);
    r.error_bound += err;
  }
  return r;
}

}  // namespace detail

// int over f1 in [lo1, hi1] of int over f2 in [lo2(f1), hi2(f1)] of |LK|^2, with kinks at f and the
// corners of the integration region passed as breakpoints.
template <class Lo, class Hi>
IntegralEstimate integrate_lk_region(const Link& link, double f, double lo1, double hi1, Lo&& lo2, Hi&& hi2,
                                     std::initializer_list<double> cuts1, const QuadratureSpec& q) {
  double inner_err = 0.0, inner_scale = 0.0;
  auto outer = [&](double f1) {
    const double a = lo2(f1), b = hi2(f1);
    if (!(b > a)) return 0.0;
    auto g = [&](double f2) { return std::norm(lk_numeric(link, f1, f2, f1 + f2 - f, q)); };
    const auto r = detail::gk_piecewise(g, detail::panel_edges(a, b, {}, f, q), q);
    inner_err = std::max(inner_err, r.error_bound / std::max(std::abs(r.value), 1e-300));
    inner_scale = std::max(inner_scale, std::abs(r.value));
    return r.value;
  };
  const std::vector<double> pts = detail::panel_edges(lo1, hi1, cuts1, f, q);
  auto r = detail::gk_piecewise(outer, pts, q);
  r.error_bound += inner_err * std::abs(r.value);
  return r;
}

// |LK|^2 integrated over the exact island polygon of (m, n, k).
inline IntegralEstimate island_integral_exact(const Link& link, const Channel& cm, const Channel& cn,
                                              const Channel& ck, double f, const QuadratureSpec& q = {}) {
  const auto [fps, fpe] = shifted_bounds(ck, f);
  if (fpe <= cm.f_start + cn.f_start || fps >= cm.f_end + cn.f_end) return {};
  auto lo2 = [&](double f1) { return std::max(cn.f_start, fps - f1); };
  auto hi2 = [&](double f1) { return std::min(cn.f_end, fpe - f1); };
  return integrate_lk_region(link, f, cm.f_start, cm.f_end, lo2, hi2,
                             {f, fps - cn.f_end, fps - cn.f_start, fpe - cn.f_end, fpe - cn.f_start}, q);
}

struct IslandIntegrals {
  IntegralEstimate exact;
  IntegralEstimate rectangle;
};

inline IslandIntegrals island_integral_numeric(const Link& link, const Channel& cm, const Channel& cn,
                                               const Channel& ck, double f, const QuadratureSpec& q = {}) {
  IslandIntegrals out;
  const Island isl = island_geometry(cm, cn, ck, f);
  if (isl.empty) return out;
  out.exact = island_integral_exact(link, cm, cn, ck, f, q);
  const double a2 = isl.f2_star - 0.5 * isl.L2, b2 = isl.f2_star + 0.5 * isl.L2;
  out.rectangle = integrate_lk_region(
      link, f, isl.f1_star - 0.5 * isl.L1, isl.f1_star + 0.5 * isl.L1, [&](double) { return a2; },
      [&](double) { return b2; }, {f}, q);
  return out;
}

struct OracleTriplet {
  int m = 0, n = 0, k = 0;
  double value = 0.0;  // includes 16/27 and the PSD product
  double error_bound = 0.0;
};

struct OracleResult {
  double f_eval = 0.0;
  double value = 0.0;
  double error_bound = 0.0;
  std::vector<OracleTriplet> triplets;
};

// Reference GN integral at f, summed over channel triplets in lexicographic order.
inline OracleResult gnli_numeric(const WdmComb& comb, const Link& link, double f, const QuadratureSpec& q = {}) {
  validate_quadrature(q);
  const std::size_t nc = comb.size();
  std::vector<OracleTriplet> trips(nc * nc * nc);
  parallel_for(trips.size(), q.threads, [&](std::size_t idx) {
    const std::size_t m = idx / (nc * nc), n = (idx / nc) % nc, k = idx % nc;
    auto& t = trips[idx];
    t.m = comb[m].index;
    t.n = comb[n].index;
    t.k = comb[k].index;
    const double psd = comb[m].psd * comb[n].psd * comb[k].psd;
    if (psd == 0.0) return;
    const auto r = island_integral_exact(link, comb[m], comb[n], comb[k], f, q);
    t.value = kGnPrefactor * psd * r.value;
    t.error_bound = kGnPrefactor * psd * r.error_bound;
  });
  OracleResult res;
  res.f_eval = f;
  for (const auto& t : trips) {
    res.value += t.value;
    res.error_bound += t.error_bound;
  }
  res.triplets = std::move(trips);
  return res;
}

}  // namespace gnclosed
