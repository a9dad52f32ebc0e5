#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coeffs.hpp"
#include "islands.hpp"
#include "link.hpp"
#include "quadrature.hpp"
#include "specialfn.hpp"
#include "spectrum.hpp"

namespace gnclosed {

inline constexpr double kGnPrefactor = 16.0 / 27.0;

struct TraceEvent {
  int m, n, k;
  std::string stage;
  std::string detail;
};

struct EngineOptions {
  int threads = 1;
  bool include_coherent = true;
  bool keep_triplets = false;
  bool trace = false;
  GuardParams guard;
  ExpFitConstants fit;
};

struct TripletRecord {
  int m = 0, n = 0, k = 0;
  Island island;
  double incoherent = 0.0;  // includes 16/27 and the PSD product
  double coherent = 0.0;
  std::int64_t kernel_evaluations = 0;
  int fallbacks = 0;
  int alpha_fit_fallbacks = 0;
  std::vector<SpanCoeffs> spans;
  std::vector<PairCoeffs> pairs;
  std::vector<TraceEvent> trace;
};

struct NliReport {
  double f_eval = 0.0;
  double g_nli_total = 0.0;
  double g_nli_incoherent = 0.0;
  double g_nli_coherent = 0.0;
  int triplet_count_nonzero = 0;
  bool negative_total_flag = false;
  bool negative_incoherent_flag = false;
  int degenerate_fallbacks = 0;
  int centroid_fallbacks = 0;
  int alpha_fit_fallbacks = 0;
  std::int64_t floor_events = 0;
  std::int64_t kernel_evaluations = 0;
  double max_kbar_deviation = 0.0;  // closed-form vs least-squares K, relative
  std::vector<TripletRecord> triplets;  // filled when keep_triplets
};

namespace detail {

inline std::string fmt_values(std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  for (const auto& [k, v] : kv) {
    os << (first ? "" : " ") << k << "=" << v;
    first = false;
  }
  return os.str();
}

// Sum_i H_i I'(tau_i |D|, K, rect); degenerate kernels fall back to quadrature of the Lorentzian form.
inline double fitted_kernel_sum(KernelKind kind, double D, const KernelParams& K, const Rect& r,
                                const EngineOptions& opt, KernelStats& stats, int& fallbacks) {
  try {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      KernelParams p = K;
      p.B = opt.fit.tau[i] * std::abs(D);
      s += opt.fit.H[i] * rect_integral(kind, p, r, opt.guard, &stats);
    }
    return s;
  } catch (const DegenerateKernel&) {
    ++fallbacks;
    return gauss_legendre_2d(
        [&](double u, double v) {
          const double uv = u * v;
          const double lor = 1.0 / (1.0 + D * D * uv * uv);
          const double ph = K.K1 * uv + K.K2 * u + K.K3 * v + K.K4;
          return kind == KernelKind::Cos ? lor * std::cos(ph) : lor * uv * std::sin(ph);
        },
        r.x1, r.x2, r.y1, r.y2, 33);
  }
}

}  // namespace detail

// Contribution of one (m, n, k) triplet at output frequency f.
inline TripletRecord triplet_contribution(const WdmComb& comb, const Link& link, std::size_t mi, std::size_t ni,
                                          std::size_t ki, double f, const EngineOptions& opt) {
  const Channel& cm = comb[mi];
  const Channel& cn = comb[ni];
  const Channel& ck = comb[ki];
  TripletRecord rec;
  rec.m = cm.index;
  rec.n = cn.index;
  rec.k = ck.index;
  auto trace = [&](const char* stage, std::string detail) {
    if (opt.trace) rec.trace.push_back({rec.m, rec.n, rec.k, stage, std::move(detail)});
  };

  rec.island = island_geometry(cm, cn, ck, f);
  const Island& isl = rec.island;
  trace("island", detail::fmt_values({{"S", isl.area}, {"f1_star", isl.f1_star}, {"f2_star", isl.f2_star},
                                      {"L1", isl.L1}, {"L2", isl.L2}}));
  const double psd = cm.psd * cn.psd * ck.psd;
  if (isl.empty || psd == 0.0) return rec;

  const std::size_t ns = link.size();
  rec.spans.reserve(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    rec.spans.push_back(span_coeffs(link, s, isl, f));
    if (rec.spans.back().fit.moment_fallback) ++rec.alpha_fit_fallbacks;
  }
  if (opt.trace) {
    for (std::size_t s = 0; s < ns; ++s) {
      const auto& c = rec.spans[s];
      const double span = static_cast<double>(s);
      trace("alpha_fit", detail::fmt_values({{"span", span}, {"alpha0_bar", c.alpha0_bar},
                                             {"alpha1_bar", c.fit.alpha1}, {"sigma_bar", c.fit.sigma}}));
      trace("g0", detail::fmt_values({{"span", span}, {"g0", c.g0}}));
      trace("theta", detail::fmt_values({{"span", span}, {"theta0", c.theta0}}));
      trace("beta2eff", detail::fmt_values({{"span", span}, {"beta2_eff", c.beta2_eff}}));
      trace("dbar", detail::fmt_values({{"span", span}, {"D1", c.D.D1}, {"D2", c.D.D2}}));
      trace("j_inc", detail::fmt_values({{"span", span}, {"J1", c.J.J1}, {"J2", c.J.J2}}));
    }
  }
  if (opt.include_coherent)
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t sp = s + 1; sp < ns; ++sp) {
        rec.pairs.push_back(pair_coeffs(link, s, sp, rec.spans, isl, f));
        const auto& pc = rec.pairs.back();
        trace("kbar", detail::fmt_values({{"ns", double(s)}, {"nsp", double(sp)}, {"K1", pc.K[0]}, {"K2", pc.K[1]},
                                          {"K3", pc.K[2]}, {"K4", pc.K[3]}}));
        trace("j_coh", detail::fmt_values({{"ns", double(s)}, {"nsp", double(sp)}, {"Jp1", pc.J.Jp[0]},
                                           {"Jp2", pc.J.Jp[1]}, {"Jp3", pc.J.Jp[2]}, {"Jp4", pc.J.Jp[3]}}));
      }
  trace("constants", detail::fmt_values({{"H1", opt.fit.H[0]}, {"H2", opt.fit.H[1]}, {"H3", opt.fit.H[2]},
                                         {"tau1", opt.fit.tau[0]}, {"tau2", opt.fit.tau[1]}, {"tau3", opt.fit.tau[2]}}));

  const Rect rect{isl.f1_star - f - 0.5 * isl.L1, isl.f1_star - f + 0.5 * isl.L1, isl.f2_star - f - 0.5 * isl.L2,
                  isl.f2_star - f + 0.5 * isl.L2};
  KernelStats stats;
  double inc = 0.0;
  for (const auto& c : rec.spans) {
    const double w = c.gamma * c.gamma * c.g0 * c.g0;
    if (w == 0.0) continue;
    double t = 0.0;
    if (c.J.J1 != 0.0)
      t += c.J.J1 * detail::fitted_kernel_sum(KernelKind::Cos, c.D.D1, {}, rect, opt, stats, rec.fallbacks);
    if (c.J.J2 != 0.0)
      t += c.J.J2 * detail::fitted_kernel_sum(KernelKind::Cos, c.D.D2, {}, rect, opt, stats, rec.fallbacks);
    inc += w * t;
  }

  double coh = 0.0;
  for (const auto& pc : rec.pairs) {
    const auto& a = rec.spans[pc.ns];
    const auto& b = rec.spans[pc.nsp];
    const double w = a.gamma * b.gamma * a.g0 * b.g0;
    if (w == 0.0) continue;
    double t = 0.0;
    if (pc.degenerate) {
      // Exact cross term of the island-averaged factors.
      ++rec.fallbacks;
      t = gauss_legendre_2d(
          [&](double u, double v) {
            const double ph = pc.K[0] * u * v + pc.K[1] * u + pc.K[2] * v + pc.K[3];
            return 2.0 * std::real(xi_factor(a, u * v) * std::conj(xi_factor(b, u * v)) *
                                   std::exp(std::complex<double>(0.0, ph)));
          },
          rect.x1, rect.x2, rect.y1, rect.y2, 33);
    } else {
      const KernelParams K{0.0, pc.K[0], pc.K[1], pc.K[2], pc.K[3]};
      for (int p = 0; p < 4; ++p) {
        if (pc.J.Jp[p] != 0.0)
          t += pc.J.Jp[p] * detail::fitted_kernel_sum(KernelKind::Cos, pc.Dp[p], K, rect, opt, stats, rec.fallbacks);
        if (pc.J.Jpp[p] != 0.0)
          t += pc.J.Jpp[p] *
               detail::fitted_kernel_sum(KernelKind::USinUV, pc.Dp[p], K, rect, opt, stats, rec.fallbacks);
      }
    }
    coh += w * t;
  }
  rec.kernel_evaluations = stats.evaluations;
  trace("kernels", detail::fmt_values({{"evaluations", double(stats.evaluations)},
                                       {"series_hits", double(stats.series_hits)},
                                       {"fallbacks", double(rec.fallbacks)}}));
  rec.incoherent = kGnPrefactor * psd * inc;
  rec.coherent = kGnPrefactor * psd * coh;
  trace("accumulate", detail::fmt_values({{"incoherent", rec.incoherent}, {"coherent", rec.coherent}}));
  return rec;
}

// Largest phase difference between closed-form and least-squares K over the equivalent rectangle,
// relative to the largest phase magnitude there.
inline double kbar_deviation(const PairCoeffs& pc, const Island& isl, double f) {
  const double xm = std::abs(isl.f1_star - f) + 0.5 * isl.L1;
  const double ym = std::abs(isl.f2_star - f) + 0.5 * isl.L2;
  const std::array<double, 4> w{xm * ym, xm, ym, 1.0};
  double diff = 0.0, scale = 0.0;
  for (int q = 0; q < 4; ++q) {
    diff += std::abs(pc.K[q] - pc.K_printed[q]) * w[q];
    scale += std::abs(pc.K[q]) * w[q];
  }
  return scale > 0.0 ? diff / scale : diff;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; each index is visited exactly once.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline NliReport gnli_at(const WdmComb& comb, const Link& link, double f, const EngineOptions& opt = {}) {
  const std::size_t nc = comb.size();
  const std::size_t total = nc * nc * nc;
  std::vector<TripletRecord> recs(total);
  parallel_for(total, opt.threads, [&](std::size_t idx) {
    const std::size_t m = idx / (nc * nc), n = (idx / nc) % nc, k = idx % nc;
    recs[idx] = triplet_contribution(comb, link, m, n, k, f, opt);
  });

  NliReport rep;
  rep.f_eval = f;
  for (auto& r : recs) {
    rep.g_nli_incoherent += r.incoherent;
    rep.g_nli_coherent += r.coherent;
    if (!r.island.empty && (r.incoherent != 0.0 || r.coherent != 0.0)) ++rep.triplet_count_nonzero;
    rep.degenerate_fallbacks += r.fallbacks;
    rep.alpha_fit_fallbacks += r.alpha_fit_fallbacks;
    if (r.island.centroid_fallback) ++rep.centroid_fallbacks;
    rep.kernel_evaluations += r.kernel_evaluations;
    for (const auto& pc : r.pairs) rep.max_kbar_deviation = std::max(rep.max_kbar_deviation, kbar_deviation(pc, r.island, f));
  }
  rep.g_nli_total = rep.g_nli_incoherent + rep.g_nli_coherent;
  rep.negative_total_flag = rep.g_nli_total < 0.0;
  rep.negative_incoherent_flag = rep.g_nli_incoherent < 0.0;
  if (opt.keep_triplets || opt.trace) rep.triplets = std::move(recs);
  return rep;
}

struct ChannelNli {
  int channel = 0;
  double bandwidth = 0.0;
  double p_nli = 0.0;  // W, flat-PSD approximation over the channel
  NliReport report;
};

inline std::vector<ChannelNli> gnli_per_channel(const WdmComb& comb, const Link& link, const EngineOptions& opt = {}) {
  std::vector<ChannelNli> out;
  for (const auto& c : comb.channels) {
    ChannelNli r;
    r.channel = c.index;
    r.bandwidth = c.bandwidth();
    r.report = gnli_at(comb, link, c.center(), opt);
    r.p_nli = r.report.g_nli_total * r.bandwidth;
    out.push_back(std::move(r));
  }
  return out;
}

// Evaluation points: channel centres, or n points spread across each channel at bin centres.
inline std::vector<double> evaluation_frequencies(const WdmComb& comb, int grid_points = 0) {
  std::vector<double> fs;
  for (const auto& c : comb.channels) {
    if (grid_points <= 1) {
      fs.push_back(c.center());
      continue;
    }
    for (int i = 0; i < grid_points; ++i) fs.push_back(c.f_start + (i + 0.5) * c.bandwidth() / grid_points);
  }
  return fs;
}

// Approximated |LK|^2 at a point with island-averaged coefficients, before the exponential-kernel fit.
inline double lk_sq_closed(double f1, double f2, double f, const std::vector<SpanCoeffs>& spans,
                           const std::vector<PairCoeffs>& pairs) {
  const double u = f1 - f, v = f2 - f, x = u * v;
  double s = 0.0;
  for (const auto& c : spans) {
    const double w = c.gamma * c.gamma * c.g0 * c.g0;
    s += w * (c.J.J1 / (1.0 + x * x * c.D.D1 * c.D.D1) + c.J.J2 / (1.0 + x * x * c.D.D2 * c.D.D2));
  }
  for (const auto& pc : pairs) {
    const auto& a = spans[pc.ns];
    const auto& b = spans[pc.nsp];
    const double w = a.gamma * b.gamma * a.g0 * b.g0;
    const double ph = pc.K[0] * x + pc.K[1] * u + pc.K[2] * v + pc.K[3];
    if (pc.degenerate) {
      s += w * 2.0 * std::real(xi_factor(a, x) * std::conj(xi_factor(b, x)) * std::exp(std::complex<double>(0.0, ph)));
      continue;
    }
    for (int p = 0; p < 4; ++p)
      s += w * (pc.J.Jp[p] * std::cos(ph) + pc.J.Jpp[p] * x * std::sin(ph)) / (1.0 + x * x * pc.Dp[p] * pc.Dp[p]);
  }
  return s;
}

}  // namespace gnclosed
