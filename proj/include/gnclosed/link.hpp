#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace gnclosed {

namespace units {
inline constexpr double kLn10 = std::numbers::ln10;
// Power attenuation in dB/km to field attenuation in Np/m.
inline constexpr double db_per_km_to_np_per_m(double v) { return v * kLn10 / 20.0 / 1e3; }
inline constexpr double np_per_m_to_db_per_km(double v) { return v * 20.0 / kLn10 * 1e3; }
inline constexpr double ps2_per_km(double v) { return v * 1e-27; }
inline constexpr double ps3_per_km(double v) { return v * 1e-39; }
inline constexpr double ps2(double v) { return v * 1e-24; }
inline constexpr double per_w_km(double v) { return v * 1e-3; }
inline constexpr double per_km(double v) { return v * 1e-3; }
inline constexpr double km(double v) { return v * 1e3; }
inline constexpr double ghz(double v) { return v * 1e9; }
inline constexpr double thz(double v) { return v * 1e12; }
inline constexpr double db_to_ln_power(double v) { return v * kLn10 / 10.0; }
}  // namespace units

// Scalar function of frequency: a constant or piecewise-linear samples clamped at the ends.
class FrequencyProfile {
public:
  FrequencyProfile() = default;
  FrequencyProfile(double value) : values_{value} {}  // NOLINT: implicit from scalar by design
  FrequencyProfile(std::vector<std::pair<double, double>> samples) {
    if (samples.empty()) throw ConfigError("profile needs at least one sample");
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 1; i < samples.size(); ++i)
      if (samples[i].first == samples[i - 1].first) throw ConfigError("profile has duplicate frequencies");
    for (auto& [f, v] : samples) {
      freqs_.push_back(f);
      values_.push_back(v);
    }
  }

  bool is_constant() const { return freqs_.empty(); }

  double operator()(double f) const {
    if (freqs_.empty()) return values_.empty() ? 0.0 : values_[0];
    if (f <= freqs_.front()) return values_.front();
    if (f >= freqs_.back()) return values_.back();
    const auto it = std::upper_bound(freqs_.begin(), freqs_.end(), f);
    const std::size_t i = static_cast<std::size_t>(it - freqs_.begin());
    const double t = (f - freqs_[i - 1]) / (freqs_[i] - freqs_[i - 1]);
    return values_[i - 1] + t * (values_[i] - values_[i - 1]);
  }

  // False when evaluation on [lo, hi] would clamp.
  bool covers(double lo, double hi) const {
    return freqs_.empty() || (freqs_.front() <= lo && freqs_.back() >= hi);
  }

  double min_value() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

  const std::vector<double>& frequencies() const { return freqs_; }
  const std::vector<double>& values() const { return values_; }

private:
  std::vector<double> freqs_;
  std::vector<double> values_;
};

// SI units throughout: m, 1/(W m), field Np/m, 1/m, s^2/m, s^3/m, Hz, s^2.
struct Span {
  double length = 0.0;
  double gamma = 0.0;
  FrequencyProfile alpha0;
  FrequencyProfile alpha1{0.0};
  FrequencyProfile sigma{0.0};
  double beta2 = 0.0;
  double beta3 = 0.0;
  double fc = 0.0;
  double beta_dcu = 0.0;
  // Natural log of the EDFA power gain; empty means transparent.
  std::optional<FrequencyProfile> edfa_log_gain;
  FrequencyProfile edfa_phase{0.0};

  // Integral of the field attenuation over the span.
  double loss_integral(double f) const {
    const double a0 = alpha0(f), a1 = alpha1(f), s = sigma(f);
    const double tail = s == 0.0 ? length : -std::expm1(-s * length) / s;
    return a0 * length + a1 * tail;
  }

  double log_gain(double f) const { return edfa_log_gain ? (*edfa_log_gain)(f) : 2.0 * loss_integral(f); }
  double gain(double f) const { return std::exp(log_gain(f)); }
  double phase(double f) const { return edfa_phase(f); }
  bool transparent() const { return !edfa_log_gain.has_value(); }
};

struct Link {
  std::vector<Span> spans;
  std::size_t size() const { return spans.size(); }
  const Span& operator[](std::size_t i) const { return spans[i]; }
};

inline void validate_link(const Link& link) {
  if (link.spans.empty()) throw ConfigError("link needs at least one span", "/link/spans");
  for (std::size_t i = 0; i < link.spans.size(); ++i) {
    const auto& s = link.spans[i];
    const std::string ptr = "/link/spans/" + std::to_string(i);
    if (!(s.length > 0.0)) throw ConfigError("length must be positive", ptr + "/length_km");
    if (!(s.gamma >= 0.0)) throw ConfigError("gamma must be non-negative", ptr + "/gamma_per_w_km");
    if (!(s.alpha0.min_value() > 0.0)) throw ConfigError("alpha0 must be positive", ptr + "/alpha0");
    if (!(s.sigma.min_value() >= 0.0)) throw ConfigError("sigma must be non-negative", ptr + "/sigma_per_km");
    if (!std::isfinite(s.beta2) || !std::isfinite(s.beta3) || !std::isfinite(s.beta_dcu))
      throw ConfigError("dispersion must be finite", ptr);
  }
}

inline double alpha_total(const Span& span, double z, double f) {
  if (!(z >= 0.0 && z <= span.length)) throw DomainError("z outside [0, L]");
  return span.alpha0(f) + span.alpha1(f) * std::exp(-span.sigma(f) * z);
}

// Propagation phase per unit length with beta0 = beta1 = 0.
inline double beta_phase(const Span& span, double f) {
  constexpr double pi = std::numbers::pi;
  const double d = f - span.fc;
  return 2.0 * pi * pi * span.beta2 * d * d + (4.0 * pi * pi * pi / 3.0) * span.beta3 * d * d * d;
}

inline double dcu_phase(const Span& span, double f) {
  constexpr double pi = std::numbers::pi;
  const double d = f - span.fc;
  return 2.0 * pi * pi * span.beta_dcu * d * d;
}

inline std::complex<double> kappa(const Span& span, double z, double f) {
  return {-alpha_total(span, z, f), -beta_phase(span, f)};
}

}  // namespace gnclosed
