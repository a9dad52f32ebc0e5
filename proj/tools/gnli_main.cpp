#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gnclosed/cli.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int default_threads() {
  if (const char* env = std::getenv("GNLI_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid GNLI_THREADS=" << env << "\n";
  }
  return 1;
}

struct Options {
  std::string config;
  std::string output;
  std::string format;
  std::string diagnostics;
  std::string plotdata;
  int threads = 1;
  int grid = -1;
  int channel = -1;
  int points = 1001;
  double xmax = 100.0;
  double rel_tol = 0.0;
  bool trace = false;
  bool no_timestamp = false;
  bool incoherent_only = false;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace gnclosed;
  CLI::App app{"Closed-form GN-model nonlinear interference PSD for multi-span WDM links"};
  app.require_subcommand(1);
  Options opt;
  opt.threads = default_threads();

  auto common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("config", opt.config, "JSON configuration file")->required();
    sub->add_option("-o,--output", opt.output, "Output file (default: stdout)");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--no-timestamp", opt.no_timestamp, "Omit the timestamp header line");
  };
  auto evaluation = [&](CLI::App* sub) {
    sub->add_option("--threads", opt.threads, "Worker threads (default: GNLI_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--grid", opt.grid, "Evaluate N points across each channel instead of the centre")
        ->check(CLI::NonNegativeNumber);
  };
  auto engine = [&](CLI::App* sub) {
    sub->add_flag("--trace", opt.trace, "Print per-triplet pipeline stages to stderr");
    sub->add_option("--diagnostics", opt.diagnostics, "Write per-triplet coefficient CSV");
    sub->add_option("--plotdata", opt.plotdata, "Write f_THz vs dBm/Hz plot data CSV");
    sub->add_flag("--incoherent-only", opt.incoherent_only, "Suppress the coherent cross-span terms");
  };
  auto quadrature = [&](CLI::App* sub) {
    sub->add_option("--rel-tol", opt.rel_tol, "Oracle relative tolerance")->check(CLI::PositiveNumber);
  };

  auto* compute = app.add_subcommand("compute", "Closed-form NLI PSD at the evaluation frequencies");
  common(compute, true);
  evaluation(compute);
  engine(compute);
  auto* oracle = app.add_subcommand("oracle", "Numerical GN integral at the evaluation frequencies");
  common(oracle, true);
  evaluation(oracle);
  quadrature(oracle);
  auto* compare = app.add_subcommand("compare", "Closed form against the numerical integral, per channel");
  common(compare, true);
  evaluation(compare);
  engine(compare);
  quadrature(compare);
  auto* islands = app.add_subcommand("islands", "Integration island records for one channel");
  common(islands, true);
  islands->add_option("--channel", opt.channel, "Channel index (default: middle channel)")
      ->check(CLI::NonNegativeNumber);
  auto* fitcheck = app.add_subcommand("fitcheck", "Exponential-fit error curve of the Lorentzian");
  common(fitcheck, false);
  fitcheck->add_option("--points", opt.points, "Number of samples")->check(CLI::Range(2, 10000000));
  fitcheck->add_option("--xmax", opt.xmax, "Upper end of the x range")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  cli::Mode mode = cli::Mode::Compute;
  if (oracle->parsed()) mode = cli::Mode::Oracle;
  if (compare->parsed()) mode = cli::Mode::Compare;
  if (islands->parsed()) mode = cli::Mode::Islands;
  if (fitcheck->parsed()) mode = cli::Mode::Fitcheck;

  try {
    cli::RunConfig cfg = mode == cli::Mode::Fitcheck ? cli::RunConfig{} : cli::parse_config(opt.config);
    cfg.mode = mode;
    cfg.threads = opt.threads;
    if (opt.grid >= 0) cfg.grid = opt.grid;
    if (opt.format == "csv") cfg.format = cli::Format::Csv;
    if (opt.format == "json") cfg.format = cli::Format::Json;
    if (opt.rel_tol > 0.0) cfg.quadrature.rel_tol = opt.rel_tol;
    if (opt.incoherent_only) cfg.include_coherent = false;
    cfg.trace = opt.trace;
    cfg.timestamp = !opt.no_timestamp;
    cfg.diagnostics_path = opt.diagnostics;
    cfg.plotdata_path = opt.plotdata;
    cfg.islands_channel = opt.channel;
    cfg.fit_points = opt.points;
    cfg.fit_xmax = opt.xmax;

    if (opt.output.empty()) return cli::run(cfg, std::cout, std::cerr);
    std::ofstream out(opt.output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + opt.output + " for writing");
    const int rc = cli::run(cfg, out, std::cerr);
    if (!out) throw std::runtime_error("write to " + opt.output + " failed");
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << cli::error_json("config", e.what(), e.pointer()) << "\n";
    return kExitConfig;
  } catch (const DegenerateKernel& e) {
    std::cerr << cli::error_json("numerical", e.what()) << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << cli::error_json("numerical", e.what()) << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << cli::error_json("numerical", e.what()) << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << cli::error_json("io", e.what()) << "\n";
    return kExitIo;
  }
}
