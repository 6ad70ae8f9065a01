#include "uavcast/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "uavcast/csv.hpp"

namespace uavcast {

DynamicsResidual dynamics_residual(const Trajectory& traj, double dt) {
  if (traj.q.size() != traj.v.size() || traj.q.size() != traj.a.size()) {
    throw std::invalid_argument("dynamics_residual: q, v, a lengths differ");
  }
  DynamicsResidual r;
  for (std::size_t k = 1; k < traj.q.size(); ++k) {
    const Vec3 dv = traj.v[k] - traj.v[k - 1] - traj.a[k - 1] * dt;
    const Vec3 dq = traj.q[k] - traj.q[k - 1] - traj.v[k - 1] * dt - 0.5 * traj.a[k - 1] * dt * dt;
    r.velocity = std::max(r.velocity, dv.norm());
    r.position = std::max(r.position, dq.norm());
  }
  return r;
}

double propulsion_power(const PropulsionParams& params, const Vec3& v, const Vec3& a) {
  const double speed = v.norm();
  if (!(speed > 0.0)) throw std::domain_error("propulsion_power: zero velocity");
  return params.c1 * speed * speed * speed +
         params.c2 / speed * (1.0 + a.squaredNorm() / (params.g0 * params.g0));
}

double flight_energy(const PropulsionParams& params, const Trajectory& traj, double dt) {
  double sum = 0.0;
  for (std::size_t k = 1; k < traj.v.size(); ++k) sum += propulsion_power(params, traj.v[k], traj.a[k]);
  return dt * sum;
}

double comm_energy(int coeffs_per_block, double dt, const PowerAllocation& power) {
  return coeffs_per_block * dt * std::accumulate(power.p.begin(), power.p.end(), 0.0);
}

void integrate_dynamics(Trajectory& traj, double dt) {
  for (std::size_t k = 1; k < traj.q.size(); ++k) {
    traj.v[k] = traj.v[k - 1] + traj.a[k - 1] * dt;
    traj.q[k] = traj.q[k - 1] + traj.v[k - 1] * dt + 0.5 * traj.a[k - 1] * dt * dt;
  }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const PowerAllocation& power) {
  CsvWriter csv(os);
  csv.row("k", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "p_w");
  for (std::size_t k = 0; k < traj.q.size(); ++k) {
    const Vec3& q = traj.q[k];
    const Vec3& v = traj.v[k];
    const Vec3& a = traj.a[k];
    if (k == 0 || k > power.p.size()) {
      csv.row(k, q.x(), q.y(), q.z(), v.x(), v.y(), v.z(), a.x(), a.y(), a.z(), "");
    } else {
      csv.row(k, q.x(), q.y(), q.z(), v.x(), v.y(), v.z(), a.x(), a.y(), a.z(), power.p[k - 1]);
    }
  }
}

}  // namespace uavcast
