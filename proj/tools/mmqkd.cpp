// Command-line front end: sweep, bounds and dist subcommands writing CSV.
//
// Exit codes: 0 success, 2 validation error, 3 inconsistent observables,
// 4 resource limit.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmqkd/cli/commands.hpp"
#include "mmqkd/cli/scenario.hpp"
#include "mmqkd/error.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInconsistent = 3;
constexpr int kExitResource = 4;

struct Options {
  std::string scenario = "sigma-4nm";
  std::vector<double> alphas;
  std::optional<double> mu_signal;
  std::optional<double> mu_decoy;
  std::string out;
  std::string model = "both";
  std::string echo;
  bool poisson = false;
  std::optional<double> q_s, q_d, e_s, e_d, y0;
};

// Writes to --out when given, stdout otherwise.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw mmqkd::ArgumentError("cannot open '" + path + "' for writing");
  fn(file);
  file.flush();
  if (!file) throw mmqkd::ArgumentError("write to '" + path + "' failed");
}

mmqkd::cli::Scenario resolve(const Options& opt) {
  auto sc = mmqkd::cli::load_scenario(opt.scenario);
  if (opt.mu_decoy) sc.protocol.mu_d = *opt.mu_decoy;
  if (opt.mu_signal) sc.mu_s = *opt.mu_signal;
  mmqkd::cli::apply_env_overrides(sc);
  return sc;
}

void echo_config(const Options& opt, const mmqkd::cli::Scenario& sc) {
  if (opt.echo.empty()) return;
  with_output(opt.echo, [&](std::ostream& os) { os << mmqkd::cli::to_json(sc).dump(2) << '\n'; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoy-state BB84 key-rate bounds for multi-mode photon sources"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "Scenario JSON file or preset id")->capture_default_str();
    sub->add_option("--mu-decoy", opt.mu_decoy, "Decoy mean photon number");
    sub->add_option("--out", opt.out, "Output CSV path (default: stdout)");
    sub->add_option("--echo-config", opt.echo, "Write the resolved scenario as JSON to this path");
  };

  auto* sweep = app.add_subcommand("sweep", "Key rate against channel attenuation");
  add_common(sweep);
  sweep->add_option("--alpha", opt.alphas, "Attenuations in dB (overrides the scenario grid)");
  sweep->add_option("--model", opt.model, "mm, sm or both")
      ->check(CLI::IsMember({"mm", "sm", "both"}))
      ->capture_default_str();

  auto* bounds = app.add_subcommand("bounds", "Yield and error-rate bounds at one operating point");
  add_common(bounds);
  bounds->add_option("--alpha", opt.alphas, "Attenuation in dB")->expected(1)->required();
  bounds->add_option("--mu-signal", opt.mu_signal, "Signal mean photon number");
  bounds->add_option("--gain-signal", opt.q_s, "Measured signal gain (replaces the honest channel)");
  bounds->add_option("--gain-decoy", opt.q_d, "Measured decoy gain");
  bounds->add_option("--qber-signal", opt.e_s, "Measured signal QBER");
  bounds->add_option("--qber-decoy", opt.e_d, "Measured decoy QBER");
  bounds->add_option("--y0", opt.y0, "Measured vacuum yield");

  auto* dist = app.add_subcommand("dist", "Photon-number distribution and g2");
  add_common(dist);
  dist->add_option("--mu-signal", opt.mu_signal, "Mean photon number");
  dist->add_flag("--poisson", opt.poisson, "Add a Poissonian reference column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    mmqkd::cli::Scenario sc = resolve(opt);
    if (sweep->parsed()) {
      if (sweep->count("--alpha") > 0) sc.alphas = opt.alphas;
      echo_config(opt, sc);
      mmqkd::SweepModels models{opt.model != "sm", opt.model != "mm"};
      with_output(opt.out, [&](std::ostream& os) { mmqkd::cli::cmd_sweep(sc, models, os, &std::cerr); });
    } else if (bounds->parsed()) {
      std::optional<mmqkd::ChannelObservables> observed;
      const int given = opt.q_s.has_value() + opt.q_d.has_value() + opt.e_s.has_value() + opt.e_d.has_value() +
                        opt.y0.has_value();
      if (given != 0 && given != 5) {
        throw mmqkd::ArgumentError(
            "hand-entered observables need all of --gain-signal --gain-decoy --qber-signal --qber-decoy --y0");
      }
      echo_config(opt, sc);
      if (given == 5) observed = mmqkd::ChannelObservables{*opt.q_s, *opt.q_d, *opt.e_s, *opt.e_d, *opt.y0};
      with_output(opt.out,
                  [&](std::ostream& os) { mmqkd::cli::cmd_bounds(sc, opt.alphas.front(), sc.mu_s, os, observed); });
    } else if (dist->parsed()) {
      echo_config(opt, sc);
      with_output(opt.out, [&](std::ostream& os) { mmqkd::cli::cmd_dist(sc, sc.mu_s, opt.poisson, os); });
    }
  } catch (const mmqkd::InconsistentObservablesError& e) {
    std::cerr << "error: inconsistent observables: " << e.what() << '\n';
    return kExitInconsistent;
  } catch (const mmqkd::ResourceError& e) {
    std::cerr << "error: resource limit: " << e.what() << '\n';
    return kExitResource;
  } catch (const mmqkd::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const mmqkd::DegenerateSourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
