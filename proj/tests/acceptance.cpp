#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "gnclosed/coeffs.hpp"
#include "gnclosed/engine.hpp"
#include "gnclosed/islands.hpp"
#include "gnclosed/oracle.hpp"
#include "gnclosed/specialfn.hpp"
#include "test_support.hpp"

using namespace gnclosed;
using testing_support::make_span;
using testing_support::repeat_span;
using testing_support::uniform_comb;

namespace {

// Pinned tolerances.
constexpr int kIslandDraws = 10000;
constexpr double kIslandAreaRel = 1e-9;
constexpr double kIslandCentroidRel = 1e-9;
constexpr double kIslandSeconds = 10.0;
constexpr int kAlgebraDraws = 1000;
constexpr double kAlgebraRel = 1e-9;
constexpr int kKernelDraws = 1000;
constexpr double kKernelRel = 1e-6;
constexpr double kKernelSeriesRel = 1e-4;
constexpr double kEiTol = 1e-9;
constexpr double kFitAtZero = 0.99751;
constexpr double kFitAtZeroTol = 1e-5;
constexpr double kFitMaxError = 0.01;
constexpr double kSingleSpanDb = 1.0;
constexpr double kSingleSpanMs = 50.0;
constexpr double kMultiSpanDb = 1.5;
constexpr double kCoherentShare = 1e-3;
constexpr double kInvariantRel = 1e-12;
constexpr double kKbarRel = 1e-10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double db(double a, double b) { return 10.0 * std::log10(a / b); }

void criterion_islands() {
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst_area = 0.0, worst_centroid = 0.0;
  int nonempty = 0, mismatched_empty = 0;
  for (int i = 0; i < kIslandDraws; ++i) {
    const auto c = testing_support::random_island_case(rng);
    const Island isl = island_geometry(c.m, c.n, c.k, c.f);
    const IslandPolygon poly = island_polygon_oracle(c.m, c.n, c.k, c.f);
    if (poly.area < 1e-15 * c.m.bandwidth() * c.n.bandwidth()) {
      if (!isl.empty) ++mismatched_empty;
      continue;
    }
    if (isl.empty) {
      ++mismatched_empty;
      continue;
    }
    ++nonempty;
    const double bw = std::max({c.m.f_end, c.n.f_end, c.k.f_end}) - std::min({c.m.f_start, c.n.f_start, c.k.f_start});
    worst_area = std::max(worst_area, std::abs(isl.area - poly.area) / poly.area);
    worst_centroid = std::max(worst_centroid, std::max(std::abs(isl.f1_star - poly.f1), std::abs(isl.f2_star - poly.f2)) / bw);
  }
  const double secs = seconds_since(t0);
  const bool pass = mismatched_empty == 0 && worst_area <= kIslandAreaRel && worst_centroid <= kIslandCentroidRel &&
                    secs < kIslandSeconds;
  report(1, "island geometry vs polygon clipping", pass,
         fmt("%.0f non-empty of 10000, max area rel %.3g, max centroid/bandwidth %.3g, %.3f s", nonempty, worst_area,
             worst_centroid, secs) +
             (mismatched_empty ? " (emptiness mismatch)" : ""));
}

SpanCoeffs algebra_coeffs(double a0, double a1, double s, double B) {
  SpanCoeffs c;
  c.alpha0_bar = a0;
  c.fit.alpha1 = a1;
  c.fit.sigma = s;
  c.B = B;
  c.beta2_eff = B / (4.0 * kPi * kPi);
  c.D = lorentzian_widths(c.beta2_eff, a0, s);
  c.J = j_incoherent(a0, a1, s);
  return c;
}

void criterion_partial_fractions() {
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> ua0(0.2, 3.0), ua1(-1.0, 1.0), us(0.05, 4.0), uB(0.3, 5.0), ux(-3.0, 3.0),
      uph(-10.0, 10.0);
  double worst_inc = 0.0, worst_coh = 0.0;
  int coherent_draws = 0;
  for (int i = 0; i < kAlgebraDraws; ++i) {
    const double sign_a = i % 2 ? 1.0 : -1.0, sign_b = i % 4 < 2 ? 1.0 : -1.0;
    const auto a = algebra_coeffs(ua0(rng), ua1(rng), us(rng), sign_a * uB(rng));
    const auto b = algebra_coeffs(ua0(rng), ua1(rng), us(rng), sign_b * uB(rng));
    const double x = ux(rng), ph = uph(rng);

    const double direct = std::norm(xi_factor(a, x));
    const double pf = a.J.J1 / (1.0 + a.D.D1 * a.D.D1 * x * x) + a.J.J2 / (1.0 + a.D.D2 * a.D.D2 * x * x);
    worst_inc = std::max(worst_inc, std::abs(pf - direct) / direct);

    JCoherent j;
    try {
      j = j_coherent(a.B, a.alpha0_bar, a.fit.alpha1, a.fit.sigma, b.B, b.alpha0_bar, b.fit.alpha1, b.fit.sigma);
    } catch (const DegenerateKernel&) {
      continue;
    }
    ++coherent_draws;
    const std::complex<double> e(std::cos(ph), std::sin(ph));
    const double cdirect = 2.0 * std::real(xi_factor(a, x) * std::conj(xi_factor(b, x)) * e);
    const std::array<double, 4> D{a.D.D1, b.D.D1, a.D.D2, b.D.D2};
    double cpf = 0.0;
    for (int p = 0; p < 4; ++p)
      cpf += (j.Jp[p] * std::cos(ph) + j.Jpp[p] * x * std::sin(ph)) / (1.0 + D[p] * D[p] * x * x);
    // The coherent term is a real part and can vanish; measure against 2|xi||xi'|.
    const double scale = 2.0 * std::abs(xi_factor(a, x)) * std::abs(xi_factor(b, x));
    worst_coh = std::max(worst_coh, std::abs(cpf - cdirect) / scale);
  }
  report(2, "partial-fraction algebra", worst_inc <= kAlgebraRel && worst_coh <= kAlgebraRel,
         fmt("1000 draws, incoherent max rel %.3g, coherent (%.0f draws) max rel %.3g", worst_inc, coherent_draws,
             worst_coh));
}

double kernel_value(KernelKind kind, const KernelParams& p, double u, double v) {
  const double ph = p.K1 * u * v + p.K2 * u + p.K3 * v + p.K4;
  const double w = std::exp(-p.B * std::abs(u * v));
  return kind == KernelKind::Cos ? w * std::cos(ph) : w * u * v * std::sin(ph);
}

void criterion_kernels() {
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> ub(0.05, 3.0), uk(-2.0, 2.0), uk4(-3.0, 3.0), ux(-2.5, 2.5),
      unear(1e-4, 2e-2), unit(0.0, 1.0);
  double worst_plain = 0.0, worst_series = 0.0;
  int plain = 0, series = 0;
  for (int t = 0; t < kKernelDraws; ++t) {
    KernelParams p{ub(rng), uk(rng), 0.5 * uk(rng), 0.5 * uk(rng), uk4(rng)};
    double x1 = ux(rng), x2 = ux(rng), y1 = ux(rng), y2 = ux(rng);
    // One draw in four puts a corner next to the origin with small linear phase so the series guard engages.
    if (unit(rng) < 0.25) {
      p.K2 *= 1e-3;
      p.K3 *= 1e-3;
      x1 = unear(rng);
      y1 = unear(rng);
      x2 = x1 + 2.0 * unit(rng) + 0.1;
      y2 = y1 + 2.0 * unit(rng) + 0.1;
    }
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const KernelKind kind = t % 2 ? KernelKind::USinUV : KernelKind::Cos;
    KernelStats stats;
    const double closed = rect_integral(kind, p, {x1, x2, y1, y2}, GuardParams{}, &stats);
    const double num = testing_support::adaptive_2d(
        [&](double u, double v) { return kernel_value(kind, p, u, v); }, x1, x2, y1, y2, 1e-10);
    // Relative to the integral of |kernel|, which stays meaningful when the signed integral cancels.
    const double l1 = testing_support::adaptive_2d(
        [&](double u, double v) { return std::abs(kernel_value(kind, p, u, v)); }, x1, x2, y1, y2, 1e-4);
    const double err = std::abs(closed - num) / std::max(l1, 1e-300);
    if (stats.series_hits > 0) {
      ++series;
      worst_series = std::max(worst_series, err);
    } else {
      ++plain;
      worst_plain = std::max(worst_plain, err);
    }
  }
  const double ei1 = expint_ei(1.0).real(), eim1 = expint_ei(-1.0).real();
  const bool ei_ok = std::abs(ei1 - 1.8951178164) <= kEiTol && std::abs(eim1 - -0.2193839344) <= kEiTol;
  report(3, "special-function kernels", worst_plain <= kKernelRel && worst_series <= kKernelSeriesRel && ei_ok,
         fmt("rect_integral max rel %.3g over %.0f plain draws, %.3g over %.0f series draws; ", worst_plain, plain,
             worst_series, series) +
             fmt("Ei(1)=%.12f Ei(-1)=%.12f", ei1, eim1));
}

void criterion_fit() {
  const ExpFitConstants fit;
  double worst = 0.0;
  for (int i = 0; i <= 1000000; ++i) {
    const double x = 100.0 * i / 1000000.0;
    worst = std::max(worst, std::abs(fit(x) - 1.0 / (1.0 + x * x)));
  }
  const double v0 = fit(0.0);
  report(4, "exponential fit of the Lorentzian", std::abs(v0 - kFitAtZero) <= kFitAtZeroTol && worst <= kFitMaxError,
         fmt("fit(0)=%.8f, max abs error on [0,100] %.6g", v0, worst));
}

constexpr double kPsd = 1e-3 / 100e9;

void criterion_single_span() {
  const Link l = repeat_span(make_span(80.0, -21.27), 1);
  const WdmComb comb = uniform_comb(5, 100e9, 100e9, kPsd);
  const double f = comb[2].center();
  gnli_at(comb, l, f);
  const auto t0 = Clock::now();
  const auto r = gnli_at(comb, l, f);
  const double ms = 1e3 * seconds_since(t0);
  const auto t1 = Clock::now();
  const auto o = gnli_numeric(comb, l, f);
  const double oracle_s = seconds_since(t1);
  const double e = db(r.g_nli_total, o.value);
  report(5, "single span vs numerical GN", std::abs(e) <= kSingleSpanDb && ms < kSingleSpanMs,
         fmt("closed %.6g, oracle %.6g W/Hz, error %+.3f dB; closed form %.2f ms", r.g_nli_total, o.value, e, ms) +
             fmt(", oracle %.1f s", oracle_s));
}

struct ChannelErrors {
  std::vector<double> full, incoherent_only;
  double centre_share = 0.0;
};

ChannelErrors multi_span_errors(double beta2) {
  const Link l = repeat_span(make_span(80.0, beta2), 5);
  const WdmComb comb = uniform_comb(9, 100e9, 100e9, kPsd);
  EngineOptions inc;
  inc.include_coherent = false;
  ChannelErrors out;
  for (std::size_t c = 0; c < comb.size(); ++c) {
    const double f = comb[c].center();
    const auto r = gnli_at(comb, l, f);
    const auto ri = gnli_at(comb, l, f, inc);
    const auto o = gnli_numeric(comb, l, f);
    out.full.push_back(db(r.g_nli_total, o.value));
    out.incoherent_only.push_back(db(ri.g_nli_total, o.value));
    if (c == comb.size() / 2) out.centre_share = std::abs(r.g_nli_coherent) / r.g_nli_total;
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double mean_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

std::string list_db(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%+.3f", x);
  return s;
}

void criterion_multi_span() {
  const auto e = multi_span_errors(-21.27);
  report(6, "five spans, nine channels vs numerical GN",
         max_abs(e.full) <= kMultiSpanDb && e.centre_share > kCoherentShare,
         "per-channel dB [" + list_db(e.full) + "]" +
             fmt(", max |dB| %.3f, centre |coherent|/total %.4g", max_abs(e.full), e.centre_share));
}

void criterion_low_dispersion() {
  const auto e = multi_span_errors(-1.0);
  const double full = mean_abs(e.full), inc = mean_abs(e.incoherent_only);
  report(7, "low dispersion, coherent terms help", full <= inc,
         fmt("beta2=-1 ps2/km: mean |dB| full %.3f, incoherent-only %.3f", full, inc) + "; full [" + list_db(e.full) +
             "]");
}

void criterion_invariants() {
  const WdmComb comb = uniform_comb(5, 100e9, 100e9, kPsd);
  std::string bad;

  const Link one = repeat_span(make_span(80.0, -21.27), 1);
  const auto r1 = gnli_at(comb, one, comb[2].center());
  if (r1.g_nli_coherent != 0.0) bad += " single-span-coherent";

  const Link l = repeat_span(make_span(80.0, -21.27, 0.2, 1.3, 0.14), 3);
  WdmComb scaled = comb;
  for (auto& c : scaled.channels) c.psd *= 2.5;
  const double f = comb[1].center() + 7e9;
  const double a = gnli_at(comb, l, f).g_nli_total, b = gnli_at(scaled, l, f).g_nli_total;
  const double cubic = std::abs(b - 2.5 * 2.5 * 2.5 * a) / std::abs(b);
  if (cubic > kInvariantRel) bad += " cubic-scaling";

  EngineOptions keep;
  keep.keep_triplets = true;
  const auto r = gnli_at(comb, l, f, keep);
  const std::size_t nc = comb.size();
  double swap = 0.0;
  int empty = 0;
  bool empty_ok = true;
  for (std::size_t m = 0; m < nc; ++m)
    for (std::size_t n = 0; n < nc; ++n)
      for (std::size_t k = 0; k < nc; ++k) {
        const auto& ta = r.triplets[(m * nc + n) * nc + k];
        const auto& tb = r.triplets[(n * nc + m) * nc + k];
        const double va = ta.incoherent + ta.coherent, vb = tb.incoherent + tb.coherent;
        if (va != 0.0) swap = std::max(swap, std::abs(va - vb) / std::abs(va));
        if (ta.island.empty) {
          ++empty;
          if (ta.incoherent != 0.0 || ta.coherent != 0.0) empty_ok = false;
        }
      }
  if (swap > kInvariantRel) bad += " m-n-swap";
  if (!empty_ok || empty == 0) bad += " empty-islands";

  bool identical = true;
  for (int threads : {2, 3, 8}) {
    EngineOptions o = keep;
    o.threads = threads;
    const auto rt = gnli_at(comb, l, f, o);
    identical = identical && rt.g_nli_total == r.g_nli_total && rt.g_nli_coherent == r.g_nli_coherent;
  }
  if (!identical) bad += " thread-determinism";

  report(8, "structural invariants", bad.empty(),
         fmt("cubic rel %.3g, swap max rel %.3g, %.0f empty islands, threads 1/2/3/8 ", cubic, swap, empty) +
             (identical ? "bit-identical" : "differ") + (bad.empty() ? "" : "; failed:" + bad));
}

Island kbar_island(const WdmComb& comb, int m, int n, int k, double f) {
  return island_geometry(comb[m], comb[n], comb[k], f);
}

void criterion_kbar() {
  const WdmComb comb = uniform_comb(5, 100e9, 100e9, kPsd);
  const double f = comb[1].center();
  auto worst_for = [&](const Link& l) {
    double worst = 0.0;
    for (int m = 0; m < 5; ++m)
      for (int n = 0; n < 5; ++n)
        for (int k = 0; k < 5; ++k) {
          const Island isl = kbar_island(comb, m, n, k, f);
          if (isl.empty) continue;
          for (std::size_t s = 0; s < l.size(); ++s)
            for (std::size_t sp = 0; sp < l.size(); ++sp) {
              if (s == sp) continue;
              const auto acc = dispersion_accumulators(l, s, sp);
              const auto p = kbar(acc, isl, f, 0.3);
              const auto q = kbar_numeric(acc, isl, f, 0.3);
              const double xm = std::abs(isl.f1_star - f) + 0.5 * isl.L1;
              const double ym = std::abs(isl.f2_star - f) + 0.5 * isl.L2;
              const std::array<double, 4> w{xm * ym, xm, ym, 1.0};
              double num = 0.0, den = 0.0;
              for (int i = 0; i < 4; ++i) {
                num += std::abs(p[i] - q[i]) * w[i];
                den += std::abs(q[i]) * w[i];
              }
              worst = std::max(worst, num / den);
            }
        }
    return worst;
  };
  const double flat = worst_for(repeat_span(make_span(80.0, -21.27), 3));
  const double slope = worst_for(repeat_span(make_span(80.0, -21.27, 0.2, 1.3, 0.14), 3));
  const Link sl = repeat_span(make_span(80.0, -21.27, 0.2, 1.3, 0.14), 3);
  const auto r = gnli_at(comb, sl, f);
  report(9, "printed K vs least-squares K", flat <= kKbarRel,
         fmt("beta3=0 max rel deviation %.3g; beta3=0.14 ps3/km printed-formula deviation %.3g ", flat, slope) +
             fmt("(engine uses least squares, recorded max %.3g)", r.max_kbar_deviation));
}

}  // namespace

int main() {
  criterion_islands();
  criterion_partial_fractions();
  criterion_kernels();
  criterion_fit();
  criterion_single_span();
  criterion_multi_span();
  criterion_low_dispersion();
  criterion_invariants();
  criterion_kbar();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
