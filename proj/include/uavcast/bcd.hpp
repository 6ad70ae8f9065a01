#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uavcast/planner.hpp"
#include "uavcast/power.hpp"
#include "uavcast/scenario.hpp"

namespace uavcast {

struct BcdSettings {
  double tolerance = 1e-4;  // relative improvement threshold in linear PSNR
  int max_outer = 100;
  int inner_sca_iters = 1;  // trajectory re-linearizations per outer iteration
  // Convergence also needs the last accepted trajectory step to be at most
  // this long (m), so the returned path is a fixed point of the expansion.
  double step_tolerance = 0.05;
  PowerSettings power;
  PlannerSettings planner;
  std::ostream* log = nullptr;  // warnings and per-iteration progress
};

/// True iff (tau_next - tau_prev) / tau_prev <= tol with tau = 10^(mu/10).
/// A decrease also returns true and writes a warning to `log` when given.
bool convergence_check(double mu_prev_db, double mu_next_db, double tol, std::ostream* log = nullptr);

struct IterationRecord {
  int iter = 0;
  double mu_db = 0.0;
  double comm_energy = 0.0;
  double flight_energy = 0.0;
  double mu_after_power = 0.0;
  bool power_accepted = false;
  bool trajectory_accepted = false;
  double slack_gap = 0.0;  // tightness of the latest trajectory solve
  int newton_iterations = 0;
};

/// Independent re-evaluation of every constraint of the joint problem.
struct Certification {
  double energy_slack = 0.0;       // J
  double comm_energy = 0.0;        // J
  double dynamics_residual = 0.0;  // max of m and m/s residuals
  double min_speed = 0.0;
  double max_speed = 0.0;
  double max_accel = 0.0;
  double endpoint_error = 0.0;     // m, worst of start and end
  double boundary_error = 0.0;     // worst of |v[0] - v0|, |a[0] - a0|
  double min_power = 0.0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

struct CertificationTolerances {
  double energy = 1e-6;
  double dynamics = 1e-6;
  double speed = 1e-6;
  double endpoint = 1e-6;
};

Certification certify(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power,
                      const CertificationTolerances& tol = {});

enum class BcdStatus { converged, max_outer, infeasible };

std::string to_string(BcdStatus status);

struct BcdResult {
  BcdStatus status = BcdStatus::infeasible;
  Trajectory traj;
  PowerAllocation power;
  std::vector<double> o;
  double mu_db = 0.0;
  double initial_mu_db = 0.0;
  int user = -1;                     // worst user at the solution
  std::vector<IterationRecord> trace; // entry 0 is the initial point
  double final_slack_gap = 0.0;      // of the last trajectory solve, accepted or not
  int newton_iterations = 0;
  Certification certification;
  std::string message;
};

/// Alternating power and trajectory optimization from the straight-line,
/// full-power start.
BcdResult optimize(const Scenario& scenario, const BcdSettings& settings = {});

/// Columns iter, mu_db, e_c_j, e_f_j.
void write_iterations_csv(std::ostream& os, const std::vector<IterationRecord>& trace);

}  // namespace uavcast
