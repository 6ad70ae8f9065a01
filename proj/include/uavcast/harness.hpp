#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uavcast/bcd.hpp"
#include "uavcast/pavt.hpp"
#include "uavcast/scenario.hpp"

namespace uavcast::harness {

enum ExitCode : int {
  kSuccess = 0,
  kError = 1,
  kInfeasible = 2,
  kNotConverged = 3,
};

/// Default parameters, n users placed uniformly in [0, 1200]^2 and the block
/// spectrum of the synthetic GOP, all derived from `seed`. Users for a
/// smaller n are a prefix of those for a larger n.
Scenario reference_scenario(std::uint64_t seed, int users = 4);

/// Fills scenario.spectrum from `gop` (kept = slots).
void attach_spectrum(Scenario& scenario, const pavt::Gop& gop);

struct Baseline {
  Trajectory traj;
  PowerAllocation power;
  double mu_db = 0.0;
  std::vector<double> psnr_db;
};

/// Straight line with equal powers that use up min(E_max, E_t - E_f).
/// Throws std::invalid_argument when the budget cannot cover the power floor.
Baseline baseline(const Scenario& scenario);

struct RunOptions {
  std::filesystem::path out;  // no files are written when empty
  bool montecarlo = false;
  std::vector<pavt::DecodeMode> modes{pavt::DecodeMode::zero_forcing};
  int trials = 100;
  std::optional<pavt::Gop> gop;  // synthetic GOP from the scenario seed when unset
  BcdSettings bcd;
};

struct RunOutcome {
  int exit_code = kError;
  BcdResult result;
  Baseline base;
  std::vector<double> psnr_db;
  std::vector<pavt::MonteCarloResult> simulated;
  std::string diagnostic;
};

/// Optimizes, certifies, and writes trajectory.csv, power.csv,
/// iterations.csv, psnr.csv and summary.txt. Files are only written for
/// certified solutions, each through a temporary file and a rename.
RunOutcome run(const Scenario& scenario, const RunOptions& options);

/// Table-style text report of one run.
std::string summary_text(const Scenario& scenario, const RunOutcome& outcome);

enum class SweepParam { slots, total_energy, users };

SweepParam parse_sweep_param(const std::string& text);
std::string to_string(SweepParam param);

struct SweepRow {
  SweepParam param = SweepParam::slots;
  double value = 0.0;
  std::string status;  // bcd status, or "error: ..."
  int exit_code = kError;
  double mu_db = 0.0;
  double baseline_db = 0.0;
  int outer_iterations = 0;
  int newton_iterations = 0;
  double slack_gap = 0.0;
  std::vector<double> psnr_db;
};

/// One run per value. K changes the slot count, E_t the total energy, N the
/// number of users (regenerated from `seed`, so smaller sets are nested in
/// larger ones). A failing member is recorded and the sweep continues.
/// When options.out is set, each member writes into <out>/<param>_<value>.
std::vector<SweepRow> sweep(const Scenario& base, SweepParam param, const std::vector<double>& values,
                            std::uint64_t seed, const RunOptions& options);

/// Columns param, value, status, min_psnr_db, baseline_db, outer_iterations,
/// newton_iterations, slack_gap, user_psnr_db (semicolon separated).
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Writes `content` to `path` through a temporary file in the same directory.
void write_atomically(const std::filesystem::path& path, const std::string& content);

}  // namespace uavcast::harness
