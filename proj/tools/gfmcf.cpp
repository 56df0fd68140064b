#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "gfm/cli/commands.hpp"

namespace {

std::pair<double, double> parse_band(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw gfm::cli::ConfigError("--band", "expected LO:HI in Hz");
  return {gfm::cli::detail::to_double("--band", s.substr(0, colon)),
          gfm::cli::detail::to_double("--band", s.substr(colon + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-signal and EMT analysis of grid-forming converter control schemes"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Run configuration (INI)")->required();
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Seed for randomized checks");

  auto* poles = app.add_subcommand("poles", "Closed-form and exact closed-loop poles");
  auto* freqresp = app.add_subcommand("freqresp", "Closed-loop frequency response");
  std::string band;
  std::size_t points = 200;
  bool with_scan = false;
  freqresp->add_option("--band", band, "Frequency band LO:HI in Hz");
  freqresp->add_option("--points", points, "Number of log-spaced frequencies");
  freqresp->add_flag("--with-scan", with_scan, "Add an injection scan of the EMT model");

  auto* simulate = app.add_subcommand("simulate", "Step response of the EMT model");
  std::optional<double> step;
  simulate->add_option("--step", step, "Power reference step in p.u.");

  auto* sweep = app.add_subcommand("sweep", "Pole sweep over the [sweep] grid");
  auto* check = app.add_subcommand("check", "Design-guideline report");
  std::size_t samples = 0;
  check->add_option("--samples", samples, "Randomized sufficiency samples per applicable rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return gfm::cli::kConfigError;
  }

  try {
    gfm::cli::Context ctx;
    ctx.cfg = gfm::cli::load_config(config_path);
    ctx.out = out_dir;
    ctx.seed = seed;
    if (*poles) return gfm::cli::cmd_poles(ctx);
    if (*freqresp) {
      gfm::cli::FreqRespOptions opt;
      if (!band.empty()) opt.band = parse_band(band);
      opt.points = points;
      opt.with_scan = with_scan;
      return gfm::cli::cmd_freqresp(ctx, opt);
    }
    if (*simulate) return gfm::cli::cmd_simulate(ctx, step);
    if (*sweep) return gfm::cli::cmd_sweep(ctx);
    if (*check) return gfm::cli::cmd_check(ctx, samples);
  } catch (const gfm::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gfm::cli::kConfigError;
  } catch (const gfm::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gfm::cli::kConfigError;
  } catch (const gfm::UnsupportedRegime& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gfm::cli::kConfigError;
  } catch (const gfm::DegenerateParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gfm::cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
