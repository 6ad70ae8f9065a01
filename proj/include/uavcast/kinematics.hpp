#pragma once

#include <iosfwd>
#include <vector>

#include "uavcast/channel.hpp"

namespace uavcast {

struct KinematicLimits {
  double v_min = 3.0;    // m/s
  double v_max = 100.0;  // m/s
  double a_max = 10.0;   // m/s^2
};

/// Fixed-wing propulsion model constants.
struct PropulsionParams {
  double c1 = 9.26e-4;
  double c2 = 2250.0;
  double g0 = 9.8;
};

/// Position, velocity and acceleration per slot. Entries are indexed 0..K;
/// index 0 holds the boundary conditions (start point, v0, a0) and is never
/// a decision variable.
struct Trajectory {
  std::vector<Vec3> q;
  std::vector<Vec3> v;
  std::vector<Vec3> a;

  int slots() const { return static_cast<int>(q.size()) - 1; }
};

/// Average transmission power per coefficient; p[k - 1] belongs to slot k.
struct PowerAllocation {
  std::vector<double> p;
};

struct DynamicsResidual {
  double position = 0.0;  // m
  double velocity = 0.0;  // m/s

  double max() const { return position > velocity ? position : velocity; }
};

/// Largest violation of v[k] - v[k-1] = a[k-1] dt and
/// q[k] - q[k-1] = v[k-1] dt + a[k-1] dt^2 / 2 over k = 1..K.
DynamicsResidual dynamics_residual(const Trajectory& traj, double dt);

/// c1 |v|^3 + (c2 / |v|) (1 + |a|^2 / g0^2). Throws std::domain_error for v = 0.
double propulsion_power(const PropulsionParams& params, const Vec3& v, const Vec3& a);

/// dt * sum of propulsion power over slots 1..K.
double flight_energy(const PropulsionParams& params, const Trajectory& traj, double dt);

/// coeffs_per_block * dt * sum(p).
double comm_energy(int coeffs_per_block, double dt, const PowerAllocation& power);

/// Integrates the slot recursion forward from q[0], v[0], a[0] and the
/// accelerations a[1..K], overwriting q[1..K] and v[1..K].
void integrate_dynamics(Trajectory& traj, double dt);

/// CSV with columns k,x,y,z,vx,vy,vz,ax,ay,az,p_w (p_w empty for k = 0).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const PowerAllocation& power);

}  // namespace uavcast
