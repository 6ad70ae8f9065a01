// Command-line driver: optimize, simulate, sweep and gen-scenario.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uavcast/harness.hpp"
#include "uavcast/pavt.hpp"
#include "uavcast/scenario.hpp"

namespace fs = std::filesystem;
using namespace uavcast;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int users = 4;
  std::string mode = "analytic";
  std::vector<std::string> decoders{"zf"};
  int trials = 100;
  std::string video;
  int width = 176;
  int height = 144;
  int frames = 3;
  int first_frame = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool simulation_flags) {
  cmd->add_option("--config", c.config, "Scenario file; default parameters with seeded users when omitted");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Scenario seed (users, noise, whitening)");
  cmd->add_option("--users", c.users, "Seeded user count when the scenario has none")->check(CLI::PositiveNumber);
  cmd->add_flag("--verbose,-v", c.verbose, "Per-iteration progress on stderr");
  if (!simulation_flags) return;
  cmd->add_option("--mode", c.mode, "PSNR evaluation")->check(CLI::IsMember({"analytic", "montecarlo"}));
  cmd->add_option("--decoder", c.decoders, "Decoders for Monte-Carlo runs (zf, llse)")
      ->check(CLI::IsMember({"zf", "zero_forcing", "llse"}));
  cmd->add_option("--trials", c.trials, "Monte-Carlo trials per user")->check(CLI::PositiveNumber);
  cmd->add_option("--video", c.video, "Planar 8-bit luma file; synthetic frames when omitted");
  cmd->add_option("--width", c.width, "Video width")->check(CLI::PositiveNumber);
  cmd->add_option("--height", c.height, "Video height")->check(CLI::PositiveNumber);
  cmd->add_option("--frames", c.frames, "Frames per group")->check(CLI::PositiveNumber);
  cmd->add_option("--first-frame", c.first_frame, "First frame of the group")->check(CLI::NonNegativeNumber);
}

std::optional<pavt::Gop> video_of(const Common& c) {
  if (c.video.empty()) return std::nullopt;
  return pavt::load_raw_gop(c.video, c.width, c.height, c.frames, c.first_frame);
}

Scenario scenario_of(const Common& c, const std::optional<pavt::Gop>& gop) {
  const std::uint64_t seed = c.seed.value_or(1);
  Scenario s = c.config.empty() ? default_scenario() : load_scenario(c.config);
  if (c.seed || c.config.empty()) s.seed = seed;
  if (s.users.empty()) s.users = generate_users(s.seed, c.users, {0.0, 1200.0}, {0.0, 1200.0});
  if (gop) {
    harness::attach_spectrum(s, *gop);
  } else if (s.spectrum.variances.empty()) {
    harness::attach_spectrum(s, pavt::synthetic_gop(s.seed));
  }
  return s;
}

harness::RunOptions options_of(const Common& c, std::optional<pavt::Gop> gop) {
  harness::RunOptions o;
  o.out = c.out;
  o.montecarlo = c.mode == "montecarlo";
  o.trials = c.trials;
  o.gop = std::move(gop);
  o.modes.clear();
  for (const auto& d : c.decoders) o.modes.push_back(pavt::parse_decode_mode(d));
  if (c.verbose) o.bcd.log = &std::cerr;
  return o;
}

int report(const Scenario& s, const harness::RunOutcome& o) {
  if (o.exit_code == harness::kSuccess || o.exit_code == harness::kNotConverged) {
    std::cout << harness::summary_text(s, o);
  }
  if (!o.diagnostic.empty()) std::cerr << "uavcast: " << o.diagnostic << '\n';
  return o.exit_code;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError("--values", "'" + item + "' is not a number");
    values.push_back(v);
  }
  if (values.empty()) throw CLI::ValidationError("--values", "no values given");
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV pseudo-analog video broadcast: joint power and trajectory optimization"};
  app.require_subcommand(1);

  Common optimize_args;
  auto* optimize_cmd = app.add_subcommand("optimize", "Optimize one scenario and write its artifacts");
  add_common(optimize_cmd, optimize_args, true);

  Common simulate_args;
  simulate_args.mode = "montecarlo";
  auto* simulate_cmd =
      app.add_subcommand("simulate", "Optimize, then verify every user's PSNR by Monte-Carlo transmission");
  add_common(simulate_cmd, simulate_args, true);

  Common sweep_args;
  std::string param;
  std::string values_text;
  auto* sweep_cmd = app.add_subcommand("sweep", "One optimization per parameter value");
  add_common(sweep_cmd, sweep_args, true);
  sweep_cmd->add_option("--param", param, "K, E_t or N")->required()->check(CLI::IsMember({"K", "E_t", "N"}));
  sweep_cmd->add_option("--values", values_text, "Comma-separated values")->required();

  Common gen_args;
  auto* gen_cmd = app.add_subcommand("gen-scenario", "Write the default scenario with seeded users");
  add_common(gen_cmd, gen_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? harness::kSuccess : harness::kError;
  }

  try {
    if (*optimize_cmd || *simulate_cmd) {
      const Common& c = *optimize_cmd ? optimize_args : simulate_args;
      auto gop = video_of(c);
      const Scenario s = scenario_of(c, gop);
      return report(s, harness::run(s, options_of(c, std::move(gop))));
    }
    if (*sweep_cmd) {
      const auto values = parse_values(values_text);
      auto gop = video_of(sweep_args);
      const Scenario s = scenario_of(sweep_args, gop);
      const auto rows = harness::sweep(s, harness::parse_sweep_param(param), values, s.seed,
                                       options_of(sweep_args, std::move(gop)));
      std::ostringstream csv;
      harness::write_sweep_csv(csv, rows);
      if (!sweep_args.out.empty()) {
        fs::create_directories(sweep_args.out);
        harness::write_atomically(fs::path(sweep_args.out) / "sweep.csv", csv.str());
      }
      std::cout << csv.str();
      int code = harness::kSuccess;
      for (const auto& r : rows) {
        if (r.exit_code != harness::kSuccess) {
          std::cerr << "uavcast: " << param << " = " << r.value << ": " << r.status << '\n';
          if (code == harness::kSuccess) code = r.exit_code;
        }
      }
      return code;
    }
    if (*gen_cmd) {
      gen_args.config.clear();
      const Scenario s = scenario_of(gen_args, std::nullopt);
      const std::string text = scenario_to_text(s);
      if (gen_args.out.empty()) {
        std::cout << text;
      } else {
        const fs::path path(gen_args.out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        harness::write_atomically(path, text);
      }
      return harness::kSuccess;
    }
  } catch (const std::exception& e) {
    std::cerr << "uavcast: " << e.what() << '\n';
    return harness::kError;
  }
  return harness::kError;
}
