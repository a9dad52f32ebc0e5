#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "spectrum.hpp"

namespace gnclosed {

// Region of the (f1, f2) plane where channels m, n and k interact for output frequency f,
// replaced by a square of equal area centred on its centroid.
struct Island {
  int m = 0, n = 0, k = 0;
  double area = 0.0;
  double f1_star = 0.0;
  double f2_star = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  bool empty = true;
  bool centroid_fallback = false;

  double f3_star(double f) const { return f1_star + f2_star - f; }
};

struct IslandPart {
  double area;
  double f1;
  double f2;
};

struct CentroidResult {
  double area = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  bool degenerate = false;
};

// Centroid of a union of signed sub-regions.
inline CentroidResult centroid_combine(std::span<const IslandPart> parts) {
  CentroidResult r;
  double m1 = 0.0, m2 = 0.0, scale = 0.0;
  for (const auto& p : parts) {
    r.area += p.area;
    m1 += p.area * p.f1;
    m2 += p.area * p.f2;
    scale += std::abs(p.area);
  }
  if (!(r.area > 1e-14 * scale) || !(r.area > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.f1 = m1 / r.area;
  r.f2 = m2 / r.area;
  r.degenerate = !std::isfinite(r.f1) || !std::isfinite(r.f2);
  return r;
}

namespace detail {
// Unit step with u(0) = 1/2.
inline double u_step(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5); }
}  // namespace detail

inline Island island_geometry(const Channel& cm, const Channel& cn, const Channel& ck, double f) {
  using detail::u_step;
  Island isl;
  isl.m = cm.index;
  isl.n = cn.index;
  isl.k = ck.index;

  // Local frame with origin (fs_m, fs_n): keeps every difference exact at optical frequencies.
  const double o1 = cm.f_start, o2 = cn.f_start;
  const double fsm = 0.0, fem = cm.f_end - cm.f_start;
  const double fsn = 0.0, fen = cn.f_end - cn.f_start;
  const double bwm = fem, bwn = fen;
  const double fps = (ck.f_start - o1) + (f - o2);
  const double fpe = (ck.f_end - o1) + (f - o2);

  const double F1 = fsm + fsn;
  const double F2 = std::min(fsm + fen, fem + fsn);
  const double F3 = std::max(fsm + fen, fem + fsn);
  const double F4 = fem + fen;

  const double t1p = std::min(fpe, F2);
  const double t1m = std::max(fps, F1);
  const double t1 = std::max(fps, F2);
  const double t2 = std::min(fpe, F3);
  const double t3p = std::max(fps, F3);
  const double t3m = std::min(fpe, F4);

  const double g1 = u_step(F2 - fps) * u_step(fpe - F1);
  const double g2 = u_step(F3 - fps) * u_step(fpe - F2);
  const double g3 = u_step(F4 - fps) * u_step(fpe - F3);

  auto s1 = [&](double t) { return 0.5 * (t - fsm - fsn) * (t - fsm - fsn); };
  auto s3 = [&](double t) { return 0.5 * (t - fem - fen) * (t - fem - fen); };
  auto c1 = [&](double t) {
    return std::pair{2.0 * fsm / 3.0 + t / 3.0 - fsn / 3.0, 2.0 * fsn / 3.0 + t / 3.0 - fsm / 3.0};
  };
  auto c3 = [&](double t) {
    return std::pair{2.0 * fem / 3.0 + t / 3.0 - fen / 3.0, 2.0 * fen / 3.0 + t / 3.0 - fem / 3.0};
  };

  const double um = u_step(bwm - bwn), un = u_step(bwn - bwm);
  const double cmid = 0.5 * (fsm + fem), cnid = 0.5 * (fsn + fen);
  const double tmid = 0.5 * (t1 + t2);
  const std::pair<double, double> c2{um * (tmid - cnid) + un * cmid, um * cnid + un * (tmid - cmid)};

  const auto [c1p1, c1p2] = c1(t1p);
  const auto [c1m1, c1m2] = c1(t1m);
  const auto [c3p1, c3p2] = c3(t3p);
  const auto [c3m1, c3m2] = c3(t3m);

  const IslandPart parts[5] = {
      {g1 * s1(t1p), c1p1, c1p2},
      {-g1 * s1(t1m), c1m1, c1m2},
      {g2 * (t2 - t1) * std::min(bwm, bwn), c2.first, c2.second},
      {g3 * s3(t3p), c3p1, c3p2},
      {-g3 * s3(t3m), c3m1, c3m2},
  };

  double S = 0.0;
  for (const auto& p : parts) S += p.area;
  if (!(S >= 1e-15 * bwm * bwn)) return isl;

  isl.empty = false;
  isl.area = S;
  isl.L1 = isl.L2 = std::sqrt(S);
  const auto c = centroid_combine(parts);
  if (c.degenerate) {
    isl.centroid_fallback = true;
    isl.f1_star = cm.center();
    isl.f2_star = cn.center();
  } else {
    isl.f1_star = o1 + c.f1;
    isl.f2_star = o2 + c.f2;
  }
  return isl;
}

struct IslandPolygon {
  std::vector<std::pair<double, double>> vertices;
  double area = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
};

// Independent route: clip the channel rectangle by the two half-planes of the k-band,
// then shoelace area and centroid.
inline IslandPolygon island_polygon_oracle(const Channel& cm, const Channel& cn, const Channel& ck, double f) {
  using Pt = std::pair<double, double>;
  const double o1 = cm.f_start, o2 = cn.f_start;
  const double bwm = cm.f_end - cm.f_start, bwn = cn.f_end - cn.f_start;
  const double fps = (ck.f_start - o1) + (f - o2);
  const double fpe = (ck.f_end - o1) + (f - o2);

  std::vector<Pt> poly{{0.0, 0.0}, {bwm, 0.0}, {bwm, bwn}, {0.0, bwn}};
  // Keep points with sign * (x + y - c) >= 0.
  auto clip = [](const std::vector<Pt>& in, double sign, double c) {
    std::vector<Pt> out;
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& a = in[i];
      const Pt& b = in[(i + 1) % n];
      const double da = sign * (a.first + a.second - c);
      const double db = sign * (b.first + b.second - c);
      if (da >= 0.0) out.push_back(a);
      if ((da >= 0.0) != (db >= 0.0)) {
        const double t = da / (da - db);
        out.push_back({a.first + t * (b.first - a.first), a.second + t * (b.second - a.second)});
      }
    }
    return out;
  };
  poly = clip(poly, 1.0, fps);
  poly = clip(poly, -1.0, fpe);

  IslandPolygon r;
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; n >= 3 && i < n; ++i) {
    const Pt& p = poly[i];
    const Pt& q = poly[(i + 1) % n];
    const double cr = p.first * q.second - q.first * p.second;
    a2 += cr;
    cx += (p.first + q.first) * cr;
    cy += (p.second + q.second) * cr;
  }
  r.area = 0.5 * a2;
  if (r.area > 0.0) {
    r.f1 = o1 + cx / (3.0 * a2);
    r.f2 = o2 + cy / (3.0 * a2);
  }
  for (const auto& p : poly) r.vertices.push_back({o1 + p.first, o2 + p.second});
  return r;
}

}  // namespace gnclosed
