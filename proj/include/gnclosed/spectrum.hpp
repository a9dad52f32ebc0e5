#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace gnclosed {

// Rectangular channel. Frequencies in Hz, psd in W/Hz.
struct Channel {
  int index = 0;
  double f_start = 0.0;
  double f_end = 0.0;
  double psd = 0.0;

  double bandwidth() const { return f_end - f_start; }
  double center() const { return 0.5 * (f_start + f_end); }
  double power() const { return psd * bandwidth(); }
};

// Channels ordered by f_start.
struct WdmComb {
  std::vector<Channel> channels;

  std::size_t size() const { return channels.size(); }
  const Channel& operator[](std::size_t i) const { return channels[i]; }

  double f_min() const { return channels.empty() ? 0.0 : channels.front().f_start; }
  double f_max() const {
    double hi = 0.0;
    for (const auto& c : channels) hi = std::max(hi, c.f_end);
    return hi;
  }
  double total_bandwidth() const { return channels.empty() ? 0.0 : f_max() - f_min(); }

  // Comb PSD at f; channel intervals are half-open.
  double psd_at(double f) const {
    for (const auto& c : channels)
      if (f >= c.f_start && f < c.f_end) return c.psd;
    return 0.0;
  }
};

enum class CombIssueKind { NonPositiveBandwidth, NegativePsd, Unsorted, Overlap };

struct CombIssue {
  CombIssueKind kind;
  int first = -1;
  int second = -1;
  std::string message;
};

inline std::vector<CombIssue> validate_comb(const WdmComb& comb) {
  std::vector<CombIssue> issues;
  const auto& ch = comb.channels;
  for (const auto& c : ch) {
    if (!(c.f_end > c.f_start)) {
      std::ostringstream os;
      os << "channel " << c.index << " has non-positive bandwidth";
      issues.push_back({CombIssueKind::NonPositiveBandwidth, c.index, -1, os.str()});
    }
    if (!(c.psd >= 0.0)) {
      std::ostringstream os;
      os << "channel " << c.index << " has negative psd";
      issues.push_back({CombIssueKind::NegativePsd, c.index, -1, os.str()});
    }
  }
  for (std::size_t i = 1; i < ch.size(); ++i) {
    if (ch[i].f_start < ch[i - 1].f_start) {
      std::ostringstream os;
      os << "channels " << ch[i - 1].index << " and " << ch[i].index << " are not sorted by start frequency";
      issues.push_back({CombIssueKind::Unsorted, ch[i - 1].index, ch[i].index, os.str()});
    }
  }
  // Touching edges are allowed; any positive-measure intersection is not.
  for (std::size_t i = 0; i < ch.size(); ++i)
    for (std::size_t j = i + 1; j < ch.size(); ++j) {
      const double lo = std::max(ch[i].f_start, ch[j].f_start);
      const double hi = std::min(ch[i].f_end, ch[j].f_end);
      if (hi > lo) {
        std::ostringstream os;
        os << "channels " << ch[i].index << " and " << ch[j].index << " overlap";
        issues.push_back({CombIssueKind::Overlap, ch[i].index, ch[j].index, os.str()});
      }
    }
  return issues;
}

inline void require_valid(const WdmComb& comb) {
  const auto issues = validate_comb(comb);
  if (comb.channels.empty()) throw ConfigError("comb has no channels", "/spectrum");
  if (issues.empty()) return;
  std::string msg;
  for (const auto& i : issues) msg += (msg.empty() ? "" : "; ") + i.message;
  throw ConfigError(msg, "/spectrum");
}

// Band of channel k translated by f: the k-band of the triplet as seen from f1 + f2.
inline std::pair<double, double> shifted_bounds(const Channel& k, double f) {
  return {k.f_start + f, k.f_end + f};
}

}  // namespace gnclosed
