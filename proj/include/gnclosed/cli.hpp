#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "errors.hpp"
#include "islands.hpp"
#include "link.hpp"
#include "oracle.hpp"
#include "specialfn.hpp"
#include "spectrum.hpp"

namespace gnclosed::cli {

using json = nlohmann::json;

enum class Mode { Compute, Oracle, Compare, Islands, Fitcheck };
enum class Format { Csv, Json };

struct RunConfig {
  WdmComb comb;
  Link link;
  Mode mode = Mode::Compute;
  int grid = 0;  // 0: channel centres
  Format format = Format::Csv;
  bool trace = false;
  bool include_coherent = true;
  bool timestamp = true;
  int threads = 1;
  int islands_channel = -1;  // -1: middle channel
  int fit_points = 1001;
  double fit_xmax = 100.0;
  std::string diagnostics_path;
  std::string plotdata_path;
  QuadratureSpec quadrature;
  GuardParams guard;
  std::vector<std::string> defaults;  // "<pointer> = <value>" for every defaulted field
  std::vector<std::string> warnings;
};

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Compute: return "compute";
    case Mode::Oracle: return "oracle";
    case Mode::Compare: return "compare";
    case Mode::Islands: return "islands";
    case Mode::Fitcheck: return "fitcheck";
  }
  return "?";
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

class Reader {
public:
  explicit Reader(RunConfig& cfg) : cfg_(cfg) {}

  const json& object(const json& parent, const std::string& ptr, const char* key, std::set<std::string> allowed) {
    const std::string p = ptr + "/" + key;
    if (!parent.contains(key)) throw ConfigError("required object missing", p);
    const json& o = parent.at(key);
    check_object(o, p, allowed);
    return o;
  }

  void check_object(const json& o, const std::string& ptr, const std::set<std::string>& allowed) {
    if (!o.is_object()) throw ConfigError("expected an object", ptr);
    for (const auto& [k, v] : o.items())
      if (!allowed.count(k)) throw ConfigError("unknown field", ptr + "/" + k);
  }

  std::optional<double> maybe_number(const json& o, const std::string& ptr, const char* key) {
    if (!o.contains(key)) return std::nullopt;
    const json& v = o.at(key);
    if (!v.is_number()) throw ConfigError("expected a number", ptr + "/" + key);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("expected a finite number", ptr + "/" + key);
    return d;
  }

  double number(const json& o, const std::string& ptr, const char* key) {
    const auto v = maybe_number(o, ptr, key);
    if (!v) throw ConfigError("required field missing", ptr + "/" + key);
    return *v;
  }

  double number(const json& o, const std::string& ptr, const char* key, double def) {
    if (const auto v = maybe_number(o, ptr, key)) return *v;
    note_default(ptr + "/" + key, format_number(def));
    return def;
  }

  // Scalar or [[freq_thz, value], ...]; `scale` maps config units to SI.
  template <class Scale>
  FrequencyProfile profile(const json& o, const std::string& ptr, const char* key, std::optional<double> def,
                           Scale scale) {
    const std::string p = ptr + "/" + key;
    if (!o.contains(key)) {
      if (!def) throw ConfigError("required field missing", p);
      note_default(p, format_number(*def));
      return FrequencyProfile(scale(*def));
    }
    return profile_value(o.at(key), p, scale);
  }

  template <class Scale>
  FrequencyProfile profile_value(const json& v, const std::string& p, Scale scale) {
    if (v.is_number()) return FrequencyProfile(scale(v.get<double>()));
    if (!v.is_array() || v.empty()) throw ConfigError("expected a number or a list of [freq_thz, value] pairs", p);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& s = v[i];
      const std::string sp = p + "/" + std::to_string(i);
      if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
        throw ConfigError("expected [freq_thz, value]", sp);
      samples.emplace_back(units::thz(s[0].get<double>()), scale(s[1].get<double>()));
    }
    try {
      return FrequencyProfile(std::move(samples));
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), p);
    }
  }

  void note_default(const std::string& ptr, const std::string& value) { cfg_.defaults.push_back(ptr + " = " + value); }
  void warn(const std::string& msg) { cfg_.warnings.push_back(msg); }

private:
  RunConfig& cfg_;
};

inline void parse_spectrum(Reader& rd, const json& root, RunConfig& cfg) {
  const json& sp = rd.object(root, "", "spectrum", {"channels", "grid"});
  if (sp.contains("channels") == sp.contains("grid"))
    throw ConfigError("give exactly one of channels or grid", "/spectrum");

  auto channel_psd = [&](const json& c, const std::string& p, double& width) {
    const auto psd = rd.maybe_number(c, p, "psd_w_per_hz");
    const auto pwr = rd.maybe_number(c, p, "power_dbm");
    const auto rate = rd.maybe_number(c, p, "symbol_rate_gbaud");
    if (width <= 0.0 && rate) {
      width = units::ghz(*rate);
      rd.note_default(p + "/width_ghz", format_number(*rate));
    }
    if (psd && pwr) throw ConfigError("give psd_w_per_hz or power_dbm, not both", p);
    if (psd) return *psd;
    if (!pwr) throw ConfigError("one of psd_w_per_hz or power_dbm is required", p);
    if (!rate) throw ConfigError("power_dbm needs symbol_rate_gbaud", p + "/symbol_rate_gbaud");
    return 1e-3 * std::pow(10.0, *pwr / 10.0) / width;
  };

  if (sp.contains("channels")) {
    const json& chs = sp.at("channels");
    if (!chs.is_array()) throw ConfigError("expected an array", "/spectrum/channels");
    for (std::size_t i = 0; i < chs.size(); ++i) {
      const std::string p = "/spectrum/channels/" + std::to_string(i);
      rd.check_object(chs[i], p, {"center_ghz", "width_ghz", "psd_w_per_hz", "power_dbm", "symbol_rate_gbaud"});
      const double fc = units::ghz(rd.number(chs[i], p, "center_ghz"));
      double width = rd.maybe_number(chs[i], p, "width_ghz").value_or(0.0) * 1e9;
      if (!chs[i].contains("width_ghz") && !chs[i].contains("symbol_rate_gbaud"))
        throw ConfigError("required field missing", p + "/width_ghz");
      const double psd = channel_psd(chs[i], p, width);
      cfg.comb.channels.push_back({static_cast<int>(i), fc - 0.5 * width, fc + 0.5 * width, psd});
    }
  } else {
    const std::string p = "/spectrum/grid";
    const json& g = rd.object(sp, "/spectrum", "grid",
                              {"count", "center_ghz", "spacing_ghz", "width_ghz", "psd_w_per_hz", "power_dbm",
                               "symbol_rate_gbaud"});
    const double count = rd.number(g, p, "count");
    if (count < 1 || count != std::floor(count)) throw ConfigError("expected a positive integer", p + "/count");
    const double f0 = units::ghz(rd.number(g, p, "center_ghz"));
    const double spacing = units::ghz(rd.number(g, p, "spacing_ghz"));
    double width = rd.maybe_number(g, p, "width_ghz").value_or(0.0) * 1e9;
    if (!g.contains("width_ghz") && !g.contains("symbol_rate_gbaud"))
      throw ConfigError("required field missing", p + "/width_ghz");
    const double psd = channel_psd(g, p, width);
    const int n = static_cast<int>(count);
    for (int i = 0; i < n; ++i) {
      const double fc = f0 + (i - 0.5 * (n - 1)) * spacing;
      cfg.comb.channels.push_back({i, fc - 0.5 * width, fc + 0.5 * width, psd});
    }
  }

  const auto issues = validate_comb(cfg.comb);
  if (!issues.empty()) {
    const auto& is = issues.front();
    const std::string p =
        sp.contains("channels") && is.first >= 0 ? "/spectrum/channels/" + std::to_string(is.first) : "/spectrum";
    throw ConfigError(is.message, p);
  }
  require_valid(cfg.comb);
}

inline void parse_link(Reader& rd, const json& root, RunConfig& cfg) {
  const json& lk = rd.object(root, "", "link", {"spans"});
  if (!lk.contains("spans") || !lk.at("spans").is_array() || lk.at("spans").empty())
    throw ConfigError("expected a non-empty array", "/link/spans");
  const json& spans = lk.at("spans");
  const double lo = cfg.comb.f_min(), hi = cfg.comb.f_max();
  const double fc_default_thz = 0.5 * (lo + hi) / 1e12;

  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string p = "/link/spans/" + std::to_string(i);
    const json& s = spans[i];
    rd.check_object(s, p,
                    {"length_km", "gamma_per_w_km", "alpha0", "alpha1", "sigma_per_km", "beta2_ps2_km",
                     "beta3_ps3_km", "fc_thz", "beta_dcu_ps2", "edfa", "repeat"});
    Span sp;
    sp.length = units::km(rd.number(s, p, "length_km"));
    if (!(sp.length > 0.0)) throw ConfigError("must be positive", p + "/length_km");
    const double gamma = rd.number(s, p, "gamma_per_w_km");
    sp.gamma = units::per_w_km(gamma);
    sp.alpha0 = rd.profile(s, p, "alpha0", std::nullopt, units::db_per_km_to_np_per_m);
    sp.alpha1 = rd.profile(s, p, "alpha1", 0.0, units::db_per_km_to_np_per_m);
    sp.sigma = rd.profile(s, p, "sigma_per_km", 0.0, units::per_km);
    const double b2 = rd.number(s, p, "beta2_ps2_km");
    sp.beta2 = units::ps2_per_km(b2);
    sp.beta3 = units::ps3_per_km(rd.number(s, p, "beta3_ps3_km", 0.0));
    sp.fc = units::thz(rd.number(s, p, "fc_thz", fc_default_thz));
    sp.beta_dcu = units::ps2(rd.number(s, p, "beta_dcu_ps2", 0.0));

    if (s.contains("edfa")) {
      const std::string ep = p + "/edfa";
      rd.check_object(s.at("edfa"), ep, {"gain", "phase"});
      const json& e = s.at("edfa");
      if (!e.contains("gain")) {
        rd.note_default(ep + "/gain", "\"transparent\"");
      } else if (!(e.at("gain").is_string() && e.at("gain").get<std::string>() == "transparent")) {
        if (e.at("gain").is_string()) throw ConfigError("expected \"transparent\" or a dB profile", ep + "/gain");
        sp.edfa_log_gain = rd.profile_value(e.at("gain"), ep + "/gain", units::db_to_ln_power);
      }
      sp.edfa_phase = rd.profile(e, ep, "phase", 0.0, [](double v) { return v; });
    } else {
      rd.note_default(p + "/edfa/gain", "\"transparent\"");
      rd.note_default(p + "/edfa/phase", "0");
    }

    int repeat = 1;
    if (s.contains("repeat")) {
      if (!s.at("repeat").is_number_integer() || s.at("repeat").get<long long>() < 1)
        throw ConfigError("expected a positive integer", p + "/repeat");
      repeat = static_cast<int>(s.at("repeat").get<long long>());
    }

    const double a0max = units::np_per_m_to_db_per_km(sp.alpha0.max_value());
    if (a0max > 2.0) rd.warn(p + "/alpha0: " + format_number(a0max) + " dB/km is above the plausible range");
    if (gamma > 10.0 || gamma < 0.0) rd.warn(p + "/gamma_per_w_km: outside the plausible range [0, 10]");
    if (std::abs(b2) > 100.0) rd.warn(p + "/beta2_ps2_km: magnitude above 100 ps^2/km");
    auto clamp_check = [&](const FrequencyProfile& fp, const std::string& name) {
      if (!fp.covers(lo, hi)) rd.warn(p + "/" + name + ": samples do not cover the comb; values are clamped");
    };
    clamp_check(sp.alpha0, "alpha0");
    clamp_check(sp.alpha1, "alpha1");
    clamp_check(sp.sigma, "sigma_per_km");
    if (sp.edfa_log_gain) clamp_check(*sp.edfa_log_gain, "edfa/gain");
    clamp_check(sp.edfa_phase, "edfa/phase");

    for (int r = 0; r < repeat; ++r) cfg.link.spans.push_back(sp);
  }
  validate_link(cfg.link);
}

inline void parse_options(Reader& rd, const json& root, RunConfig& cfg) {
  if (root.contains("evaluation")) {
    const json& e = rd.object(root, "", "evaluation", {"grid"});
    const double g = rd.number(e, "/evaluation", "grid", 0.0);
    if (g < 0 || g != std::floor(g)) throw ConfigError("expected a non-negative integer", "/evaluation/grid");
    cfg.grid = static_cast<int>(g);
  } else {
    rd.note_default("/evaluation/grid", "0");
  }

  if (root.contains("output")) {
    const json& o = rd.object(root, "", "output", {"format"});
    if (o.contains("format")) {
      const json& f = o.at("format");
      if (f == "csv") cfg.format = Format::Csv;
      else if (f == "json") cfg.format = Format::Json;
      else throw ConfigError("expected \"csv\" or \"json\"", "/output/format");
    }
  }

  if (root.contains("engine")) {
    const json& e = rd.object(root, "", "engine", {"include_coherent"});
    if (e.contains("include_coherent")) {
      if (!e.at("include_coherent").is_boolean()) throw ConfigError("expected a boolean", "/engine/include_coherent");
      cfg.include_coherent = e.at("include_coherent").get<bool>();
    }
  }

  const json empty = json::object();
  const json& g = root.contains("guard") ? rd.object(root, "", "guard", {"threshold", "series_terms"}) : empty;
  cfg.guard.threshold = rd.number(g, "/guard", "threshold", cfg.guard.threshold);
  const double nl = rd.number(g, "/guard", "series_terms", cfg.guard.series_terms);
  if (!(cfg.guard.threshold > 0.0)) throw ConfigError("must be positive", "/guard/threshold");
  if (nl < 1 || nl != std::floor(nl)) throw ConfigError("expected a positive integer", "/guard/series_terms");
  cfg.guard.series_terms = static_cast<int>(nl);

  const json& q = root.contains("quadrature")
                      ? rd.object(root, "", "quadrature",
                                  {"rel_tol", "max_depth", "z_steps", "z_rule", "min_panel_mhz", "max_panel_ghz"})
                      : empty;
  auto& qs = cfg.quadrature;
  qs.rel_tol = rd.number(q, "/quadrature", "rel_tol", qs.rel_tol);
  qs.max_depth = static_cast<unsigned>(rd.number(q, "/quadrature", "max_depth", qs.max_depth));
  qs.z_steps = static_cast<int>(rd.number(q, "/quadrature", "z_steps", qs.z_steps));
  qs.min_panel_hz = 1e6 * rd.number(q, "/quadrature", "min_panel_mhz", qs.min_panel_hz / 1e6);
  qs.max_panel_hz = 1e9 * rd.number(q, "/quadrature", "max_panel_ghz", qs.max_panel_hz / 1e9);
  if (q.contains("z_rule")) {
    const json& r = q.at("z_rule");
    if (r == "filon") qs.z_rule = ZRule::Filon;
    else if (r == "gauss_legendre") qs.z_rule = ZRule::GaussLegendre;
    else throw ConfigError("expected \"filon\" or \"gauss_legendre\"", "/quadrature/z_rule");
  } else {
    rd.note_default("/quadrature/z_rule", "\"filon\"");
  }
  validate_quadrature(qs);
}

}  // namespace detail

// Builds a validated RunConfig in SI units from a parsed document.
inline RunConfig parse_config_json(const json& root) {
  RunConfig cfg;
  detail::Reader rd(cfg);
  rd.check_object(root, "", {"spectrum", "link", "evaluation", "output", "engine", "guard", "quadrature"});
  detail::parse_spectrum(rd, root, cfg);
  detail::parse_link(rd, root, cfg);
  detail::parse_options(rd, root, cfg);
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config_json(root);
}

// Output table: CSV (RFC 4180, '#' comment header) or JSON.
using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const Cell& c) {
  if (std::holds_alternative<double>(c)) return format_number(std::get<double>(c));
  if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
  if (std::holds_alternative<std::string>(c)) return csv_field(std::get<std::string>(c));
  return "";
}

inline json cell_json(const Cell& c) {
  if (std::holds_alternative<double>(c)) {
    const double v = std::get<double>(c);
    return std::isfinite(v) ? json(v) : json(format_number(v));
  }
  if (std::holds_alternative<long long>(c)) return std::get<long long>(c);
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  return nullptr;
}

struct Header {
  std::string mode;
  std::optional<std::string> timestamp;
  std::vector<std::string> defaults;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> info;
};

inline void write_table(std::ostream& os, const Table& t, const Header& h, Format fmt) {
  if (fmt == Format::Csv) {
    os << "# gnli " << h.mode << "\n";
    if (h.timestamp) os << "# generated " << *h.timestamp << "\n";
    for (const auto& [k, v] : h.info) os << "# " << k << " " << v << "\n";
    for (const auto& d : h.defaults) os << "# default " << d << "\n";
    for (const auto& w : h.warnings) os << "# warning " << w << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_field(t.columns[i]);
    os << "\r\n";
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
      os << "\r\n";
    }
    return;
  }
  json doc;
  doc["mode"] = h.mode;
  if (h.timestamp) doc["generated"] = *h.timestamp;
  for (const auto& [k, v] : h.info) doc["info"][k] = v;
  doc["defaults"] = h.defaults;
  doc["warnings"] = h.warnings;
  doc["rows"] = json::array();
  for (const auto& r : t.rows) {
    json row = json::object();
    for (std::size_t i = 0; i < r.size(); ++i) row[t.columns[i]] = cell_json(r[i]);
    doc["rows"].push_back(std::move(row));
  }
  os << doc.dump(2) << "\n";
}

struct EvalPoint {
  double f = 0.0;
  int channel = 0;
};

inline std::vector<EvalPoint> evaluation_points(const WdmComb& comb, int grid) {
  std::vector<EvalPoint> out;
  for (const auto& c : comb.channels) {
    const WdmComb one{{c}};
    for (double f : evaluation_frequencies(one, grid)) out.push_back({f, c.index});
  }
  return out;
}

inline std::string report_flags(const NliReport& r) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (on) s += (s.empty() ? "" : ";") + std::string(name);
  };
  add(r.negative_total_flag, "negative_total");
  add(r.negative_incoherent_flag, "negative_incoherent");
  add(r.degenerate_fallbacks > 0, "kernel_fallback");
  add(r.centroid_fallbacks > 0, "centroid_fallback");
  add(r.alpha_fit_fallbacks > 0, "alpha_fit_fallback");
  return s;
}

// 10 log10(|x| / 1 mW); -inf for zero.
inline double dbm_per_hz(double w_per_hz) { return 10.0 * std::log10(std::abs(w_per_hz) / 1e-3); }

// f_THz against total, incoherent and coherent PSD in dBm/Hz; signs live in the flag column.
inline std::string plotdata_csv(const std::vector<NliReport>& reports) {
  if (reports.empty()) throw ConfigError("plot data needs at least one report");
  std::ostringstream os;
  os << "f_thz,total_dbm_per_hz,incoherent_dbm_per_hz,coherent_dbm_per_hz,flag\r\n";
  for (const auto& r : reports) {
    std::string flag;
    if (r.g_nli_total < 0.0) flag = "negative_total";
    if (r.g_nli_coherent < 0.0) flag += (flag.empty() ? "" : ";") + std::string("negative_coherent");
    os << format_number(r.f_eval / 1e12) << "," << format_number(dbm_per_hz(r.g_nli_total)) << ","
       << format_number(dbm_per_hz(r.g_nli_incoherent)) << "," << format_number(dbm_per_hz(r.g_nli_coherent)) << ","
       << csv_field(flag) << "\r\n";
  }
  return os.str();
}

inline void emit_plotdata(const std::vector<NliReport>& reports, const std::string& path) {
  const std::string text = plotdata_csv(reports);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

// Per-triplet coefficient dump: one row per span and one per span pair.
inline std::string diagnostics_csv(const std::vector<NliReport>& reports) {
  std::ostringstream os;
  os << "f_hz,m,n,k,kind,span,span_p,alpha0_bar,alpha1_bar,sigma_bar,beta2_eff,K1,K2,K3,K4\r\n";
  for (const auto& r : reports)
    for (const auto& t : r.triplets) {
      if (t.island.empty) continue;
      const std::string key =
          format_number(r.f_eval) + "," + std::to_string(t.m) + "," + std::to_string(t.n) + "," + std::to_string(t.k);
      for (std::size_t s = 0; s < t.spans.size(); ++s) {
        const auto& c = t.spans[s];
        os << key << ",span," << s << ",," << format_number(c.alpha0_bar) << "," << format_number(c.fit.alpha1) << ","
           << format_number(c.fit.sigma) << "," << format_number(c.beta2_eff) << ",,,,\r\n";
      }
      for (const auto& pc : t.pairs)
        os << key << ",pair," << pc.ns << "," << pc.nsp << ",,,,," << format_number(pc.K[0]) << ","
           << format_number(pc.K[1]) << "," << format_number(pc.K[2]) << "," << format_number(pc.K[3]) << "\r\n";
    }
  return os.str();
}

inline std::string trace_lines(const std::vector<NliReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports)
    for (const auto& t : r.triplets)
      for (const auto& e : t.trace)
        os << "trace f=" << format_number(r.f_eval) << " m=" << e.m << " n=" << e.n << " k=" << e.k << " "
           << e.stage << " " << e.detail << "\n";
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline EngineOptions engine_options(const RunConfig& cfg, bool keep_triplets) {
  EngineOptions o;
  o.threads = cfg.threads;
  o.include_coherent = cfg.include_coherent;
  o.keep_triplets = keep_triplets || !cfg.diagnostics_path.empty();
  o.trace = cfg.trace;
  o.guard = cfg.guard;
  return o;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

// Executes the configured mode; results go to `out`, timing, traces and summaries to `log`.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  Header h;
  h.mode = mode_name(cfg.mode);
  if (cfg.timestamp) h.timestamp = utc_timestamp();
  h.defaults = cfg.defaults;
  h.warnings = cfg.warnings;
  for (const auto& w : cfg.warnings) log << "warning: " << w << "\n";
  Table t;

  if (cfg.mode == Mode::Fitcheck) {
    const ExpFitConstants fit;
    t.columns = {"x", "lorentzian", "fit", "error"};
    const int n = std::max(cfg.fit_points, 2);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = cfg.fit_xmax * i / (n - 1);
      const double l = 1.0 / (1.0 + x * x), v = fit(x);
      worst = std::max(worst, std::abs(v - l));
      t.rows.push_back({x, l, v, v - l});
    }
    h.defaults.clear();
    h.info.push_back({"max_abs_error", format_number(worst)});
    write_table(out, t, h, cfg.format);
    return 0;
  }

  const std::size_t nc = cfg.comb.size();
  h.info.push_back({"channels", std::to_string(nc)});
  h.info.push_back({"spans", std::to_string(cfg.link.size())});

  if (cfg.mode == Mode::Islands) {
    const int ch = cfg.islands_channel < 0 ? static_cast<int>(nc / 2) : cfg.islands_channel;
    if (ch >= static_cast<int>(nc)) throw ConfigError("channel index out of range", "--channel");
    const double f = cfg.comb[ch].center();
    h.info.push_back({"f_hz", format_number(f)});
    t.columns = {"m", "n", "k", "S", "f1_star", "f2_star", "L1", "L2"};
    for (std::size_t m = 0; m < nc; ++m)
      for (std::size_t n = 0; n < nc; ++n)
        for (std::size_t k = 0; k < nc; ++k) {
          const Island isl = island_geometry(cfg.comb[m], cfg.comb[n], cfg.comb[k], f);
          t.rows.push_back({(long long)isl.m, (long long)isl.n, (long long)isl.k, isl.area, isl.f1_star, isl.f2_star,
                            isl.L1, isl.L2});
        }
    write_table(out, t, h, cfg.format);
    return 0;
  }

  const auto points = evaluation_points(cfg.comb, cfg.grid);
  std::vector<NliReport> reports;
  std::vector<OracleResult> oracle;
  const bool want_engine = cfg.mode != Mode::Oracle;
  const bool want_oracle = cfg.mode != Mode::Compute;
  const auto t0 = std::chrono::steady_clock::now();
  if (want_engine) {
    const EngineOptions opt = engine_options(cfg, cfg.mode == Mode::Compare);
    for (const auto& p : points) reports.push_back(gnli_at(cfg.comb, cfg.link, p.f, opt));
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (want_oracle) {
    QuadratureSpec q = cfg.quadrature;
    q.threads = cfg.threads;
    for (const auto& p : points) oracle.push_back(gnli_numeric(cfg.comb, cfg.link, p.f, q));
  }
  const auto t2 = std::chrono::steady_clock::now();

  const double triplets = static_cast<double>(nc * nc * nc * points.size());
  h.info.push_back({"triplets_per_point", std::to_string(nc * nc * nc)});
  if (want_engine) {
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    log << "closed form: " << points.size() << " points, " << nc * nc * nc << " triplets each, "
        << format_number(ms) << " ms total, " << format_number(1e3 * ms / triplets) << " us per triplet\n";
  }
  if (want_oracle) {
    const double ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    log << "oracle: " << format_number(ms) << " ms total\n";
  }

  if (cfg.mode == Mode::Compute) {
    t.columns = {"f_hz", "channel", "g_nli_w_per_hz", "incoherent", "coherent", "flags"};
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& r = reports[i];
      t.rows.push_back({points[i].f, (long long)points[i].channel, r.g_nli_total, r.g_nli_incoherent,
                        r.g_nli_coherent, report_flags(r)});
    }
  } else if (cfg.mode == Mode::Oracle) {
    t.columns = {"f_hz", "channel", "g_nli_w_per_hz", "incoherent", "coherent", "flags", "error_bound"};
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& o = oracle[i];
      t.rows.push_back({points[i].f, (long long)points[i].channel, o.value, std::monostate{}, std::monostate{},
                        std::string(o.value < 0.0 ? "negative_total" : ""), o.error_bound});
    }
  } else {
    t.columns = {"f_hz",         "channel",     "g_nli_w_per_hz", "incoherent",   "coherent",
                 "oracle_w_per_hz", "oracle_error_bound", "db_error", "worst_m", "worst_n",
                 "worst_k",      "worst_closed", "worst_oracle",  "flags"};
    double max_err = 0.0, sum_err = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& r = reports[i];
      const auto& o = oracle[i];
      const double db = 10.0 * std::log10(r.g_nli_total / o.value);
      max_err = std::max(max_err, std::abs(db));
      sum_err += std::abs(db);
      std::size_t worst = 0;
      double wd = -1.0;
      for (std::size_t j = 0; j < o.triplets.size(); ++j) {
        const double d = std::abs(r.triplets[j].incoherent + r.triplets[j].coherent - o.triplets[j].value);
        if (d > wd) {
          wd = d;
          worst = j;
        }
      }
      const auto& wt = r.triplets[worst];
      t.rows.push_back({points[i].f, (long long)points[i].channel, r.g_nli_total, r.g_nli_incoherent,
                        r.g_nli_coherent, o.value, o.error_bound, db, (long long)wt.m, (long long)wt.n,
                        (long long)wt.k, wt.incoherent + wt.coherent, o.triplets[worst].value, report_flags(r)});
    }
    h.info.push_back({"max_abs_db_error", format_number(max_err)});
    h.info.push_back({"mean_abs_db_error", format_number(sum_err / points.size())});
    log << "compare: max |dB error| " << format_number(max_err) << ", mean " << format_number(sum_err / points.size())
        << "\n";
  }

  write_table(out, t, h, cfg.format);
  if (cfg.trace) log << trace_lines(reports);
  if (!cfg.diagnostics_path.empty()) write_text_file(cfg.diagnostics_path, diagnostics_csv(reports));
  if (!cfg.plotdata_path.empty() && !reports.empty()) emit_plotdata(reports, cfg.plotdata_path);
  return 0;
}

// Machine-readable error line for stderr.
inline std::string error_json(const std::string& kind, const std::string& message, const std::string& pointer = {}) {
  json e{{"error", kind}, {"message", message}};
  if (!pointer.empty()) e["pointer"] = pointer;
  return e.dump();
}

}  // namespace gnclosed::cli
