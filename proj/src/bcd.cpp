#include "uavcast/bcd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "uavcast/csv.hpp"
#include "uavcast/quality.hpp"

namespace uavcast {

bool convergence_check(double mu_prev_db, double mu_next_db, double tol, std::ostream* log) {
  const double tau_prev = std::pow(10.0, mu_prev_db / 10.0);
  const double tau_next = std::pow(10.0, mu_next_db / 10.0);
  if (tau_next < tau_prev) {
    if (log) *log << "warning: min-PSNR decreased from " << mu_prev_db << " dB to " << mu_next_db << " dB\n";
    return true;
  }
  return (tau_next - tau_prev) / tau_prev <= tol;
}

std::string to_string(BcdStatus status) {
  switch (status) {
    case BcdStatus::converged:
      return "converged";
    case BcdStatus::max_outer:
      return "max_outer";
    case BcdStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

Certification certify(const Scenario& s, const Trajectory& traj, const PowerAllocation& power,
                      const CertificationTolerances& tol) {
  Certification c;
  auto fail = [&c](std::string msg) { c.failures.push_back(std::move(msg)); };
  const int K = s.slots;
  if (traj.slots() != K || static_cast<int>(power.p.size()) != K) {
    fail("trajectory or power length does not match the slot count");
    return c;
  }

  const EnergyReport e = energy_feasible(s, traj, power);
  c.energy_slack = e.slack;
  c.comm_energy = e.comm;
  if (e.slack < -tol.energy) fail("total energy exceeds the budget");
  if (e.comm > s.max_comm_energy() + tol.energy) fail("communication energy exceeds its cap");

  c.dynamics_residual = dynamics_residual(traj, s.slot_len).max();
  if (c.dynamics_residual > tol.dynamics) fail("dynamics residual above tolerance");

  c.min_speed = traj.v[1].norm();
  for (int k = 1; k <= K; ++k) {
    const double speed = traj.v[k].norm();
    c.min_speed = std::min(c.min_speed, speed);
    c.max_speed = std::max(c.max_speed, speed);
    c.max_accel = std::max(c.max_accel, traj.a[k].norm());
  }
  if (c.min_speed < s.limits.v_min - tol.speed) fail("speed below v_min");
  if (c.max_speed > s.limits.v_max + tol.speed) fail("speed above v_max");
  if (c.max_accel > s.limits.a_max + tol.speed) fail("acceleration above a_max");

  c.endpoint_error = std::max((traj.q[0] - s.start).norm(), (traj.q[K] - s.end).norm());
  if (c.endpoint_error > tol.endpoint) fail("endpoint mismatch");
  c.boundary_error = std::max((traj.v[0] - s.v0).norm(), (traj.a[0] - s.a0).norm());
  if (c.boundary_error > tol.endpoint) fail("initial velocity or acceleration mismatch");

  c.min_power = *std::min_element(power.p.begin(), power.p.end());
  if (c.min_power < s.p_floor) fail("power below the floor");
  if (s.per_slot_cap) {
    const double pmax = *std::max_element(power.p.begin(), power.p.end());
    if (pmax > s.max_avg_power * (1.0 + 1e-12)) fail("per-slot power above the cap");
  }
  return c;
}

BcdResult optimize(const Scenario& s, const BcdSettings& settings) {
  require_valid(s);
  BcdResult res;
  auto [traj, power] = initial_solution(s);

  EnergyReport e = energy_feasible(s, traj, power);
  if (e.flight >= s.total_energy) {
    res.message = "flight energy of the straight-line start exceeds the total budget";
    res.traj = traj;
    res.power = power;
    return res;
  }
  if (!e.feasible()) {
    const double target = std::min(s.max_comm_energy(), s.total_energy - e.flight) * (1.0 - 1e-9);
    const double scale = target / e.comm;
    for (double& p : power.p) p *= scale;
    if (power.p.front() < s.p_floor) {
      res.message = "energy budget leaves no room for communication";
      res.traj = traj;
      res.power = power;
      return res;
    }
    e = energy_feasible(s, traj, power);
  }

  double mu = min_psnr(s, traj, power).value_db;
  res.initial_mu_db = mu;
  res.trace.push_back({0, mu, e.comm, e.flight, mu, false, false, 0.0, 0});

  double last_step = std::numeric_limits<double>::infinity();
  std::vector<double> o(s.slots);
  for (int k = 1; k <= s.slots; ++k) o[k - 1] = traj.v[k].norm();
  res.status = BcdStatus::max_outer;

  for (int r = 1; r <= settings.max_outer; ++r) {
    const double mu_prev = mu;
    IterationRecord rec;
    rec.iter = r;

    PowerResult pr = solve_power(s, traj, power, settings.power);
    rec.newton_iterations += pr.report.newton_iterations;
    if (pr.report.status != convex::SolveStatus::infeasible && pr.mu_db >= mu &&
        energy_feasible(s, traj, pr.power).feasible()) {
      power = std::move(pr.power);
      mu = pr.mu_db;
      rec.power_accepted = true;
    }
    rec.mu_after_power = mu;

    for (int inner = 0; inner < std::max(settings.inner_sca_iters, 1); ++inner) {
      PlannerSettings ps = settings.planner;
      ps.trust_region = ps.trust_region && (r == 1 || last_step > 0.5 * ps.trust_radius);
      TrajectoryResult tr = solve_trajectory(s, power, traj, ps);
      rec.newton_iterations += tr.report.newton_iterations;
      if (tr.report.status == convex::SolveStatus::infeasible) break;
      rec.slack_gap = slack_tightness(tr.traj, tr.o);
      res.final_slack_gap = rec.slack_gap;
      if (tr.true_mu_db >= mu && energy_feasible(s, tr.traj, power).feasible()) {
        traj = std::move(tr.traj);
        o = std::move(tr.o);
        mu = tr.true_mu_db;
        last_step = tr.max_step;
        rec.trajectory_accepted = true;
      } else {
        last_step = 0.0;
        break;
      }
    }

    e = energy_feasible(s, traj, power);
    rec.mu_db = mu;
    rec.comm_energy = e.comm;
    rec.flight_energy = e.flight;
    res.newton_iterations += rec.newton_iterations;
    res.trace.push_back(rec);
    if (settings.log) {
      *settings.log << "iter " << r << ": mu " << mu << " dB, E_c " << e.comm << " J, E_f " << e.flight
                    << " J, newton " << rec.newton_iterations << '\n';
    }
    if (convergence_check(mu_prev, mu, settings.tolerance, settings.log) && last_step <= settings.step_tolerance) {
      res.status = BcdStatus::converged;
      break;
    }
  }

  const MinPsnr worst = min_psnr(s, traj, power);
  res.mu_db = worst.value_db;
  res.user = worst.user;
  res.traj = std::move(traj);
  res.power = std::move(power);
  res.o = std::move(o);
  res.certification = certify(s, res.traj, res.power);
  if (!res.certification.ok()) res.message = "certification failed: " + res.certification.failures.front();
  return res;
}

void write_iterations_csv(std::ostream& os, const std::vector<IterationRecord>& trace) {
  CsvWriter csv(os);
  csv.row("iter", "mu_db", "e_c_j", "e_f_j");
  for (const auto& r : trace) csv.row(r.iter, r.mu_db, r.comm_energy, r.flight_energy);
}

}  // namespace uavcast
