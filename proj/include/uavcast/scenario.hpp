#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uavcast/channel.hpp"
#include "uavcast/kinematics.hpp"

namespace uavcast {

struct GroundUser {
  int id = 0;
  Vec3 position = Vec3::Zero();  // z = 0
};

/// Variances of the coefficient blocks in nonincreasing order. The first
/// `kept` blocks are transmitted, one per slot; the rest are discarded.
struct BlockSpectrum {
  std::vector<double> variances;
  int kept = 0;
};

/// A full problem instance. All quantities are linear-scale SI; the file
/// format carries dBm / dB values that are converted on load.
struct Scenario {
  std::vector<GroundUser> users;
  Vec3 start{0.0, 300.0, 100.0};
  Vec3 end{300.0, 0.0, 100.0};
  double altitude = 100.0;
  int slots = 180;
  double slot_len = 0.1;
  KinematicLimits limits;
  PropulsionParams propulsion;
  ChannelParams channel;
  BlockSpectrum spectrum;
  double total_energy = 3000.0;   // J
  double max_avg_power = 0.01;    // W
  int coeffs_per_block = 396;
  double pixel_peak = 255.0;
  Vec3 v0 = Vec3::Zero();
  Vec3 a0 = Vec3::Zero();
  // v0 follows cruise_velocity() whenever derived fields are refreshed.
  bool v0_auto = true;
  // Enforce p_k <= max_avg_power per slot in addition to the total bound.
  bool per_slot_cap = true;
  double p_floor = 1e-9;  // W
  std::uint64_t seed = 0;

  /// K * N_p * dt * max_avg_power.
  double max_comm_energy() const {
    return slots * coeffs_per_block * slot_len * max_avg_power;
  }
  /// (end - start) / (K dt).
  Vec3 cruise_velocity() const { return (end - start) / (slots * slot_len); }
};

struct ValidationResult {
  std::vector<std::string> errors;
  double cruise_speed = 0.0;

  bool ok() const { return errors.empty(); }
  std::string message() const;
};

/// Recomputes fields that depend on others: v0 (when v0_auto) and
/// spectrum.kept = slots.
void refresh_derived(Scenario& scenario);

ValidationResult validate(const Scenario& scenario);

/// Throws std::invalid_argument carrying every diagnostic when invalid.
void require_valid(const Scenario& scenario);

/// Uniform placement in the box, z = 0, ids 1..n. Deterministic in `seed`.
std::vector<GroundUser> generate_users(std::uint64_t seed, int n, std::pair<double, double> x_range,
                                       std::pair<double, double> y_range);

/// Straight constant-speed flight from start to end with every slot at the
/// maximum average power.
std::pair<Trajectory, PowerAllocation> initial_solution(const Scenario& scenario);

struct EnergyReport {
  double comm = 0.0;     // E_c, J
  double flight = 0.0;   // E_f, J
  double slack = 0.0;    // E_t - E_c - E_f
  bool within_total = false;
  bool within_comm_cap = false;

  bool feasible() const { return within_total && within_comm_cap; }
};

EnergyReport energy_feasible(const Scenario& scenario, const Trajectory& traj,
                             const PowerAllocation& power);

/// Default parameters without users or spectrum.
Scenario default_scenario();

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
std::string scenario_to_text(const Scenario& scenario);
/// `source` names the input in diagnostics. Keys may be overridden through
/// environment variables named UAVCAST_<KEY> (upper case), parsed as JSON.
Scenario scenario_from_text(const std::string& text, const std::string& source = "<string>");

}  // namespace uavcast
