#pragma once

#include <cmath>
#include <vector>

#include "uavcast/rng.hpp"
#include "uavcast/scenario.hpp"

namespace uavcast::testing {

// Geometric spectrum lambda_m = top * ratio^m, m = 0..blocks-1.
inline std::vector<double> geometric_spectrum(int blocks, double top, double ratio) {
  std::vector<double> lam(blocks);
  for (int m = 0; m < blocks; ++m) lam[m] = top * std::pow(ratio, m);
  return lam;
}

// Default parameters with K slots, the given users and a geometric spectrum
// with two more blocks than slots.
inline Scenario small_scenario(int slots, std::vector<Vec3> users) {
  Scenario s = default_scenario();
  s.slots = slots;
  s.spectrum.variances = geometric_spectrum(slots + 2, 4000.0, 0.9);
  int id = 1;
  for (const auto& u : users) s.users.push_back({id++, u});
  refresh_derived(s);
  return s;
}

// Straight-line trajectory with positions replaced by `positions` (slots
// 1..K); velocities and accelerations keep their straight-line values.
inline Trajectory with_positions(Trajectory traj, const std::vector<Vec3>& positions) {
  for (std::size_t k = 0; k < positions.size(); ++k) traj.q[k + 1] = positions[k];
  return traj;
}

inline Vec3 random_point(Rng& rng, double lo, double hi, double z) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), z};
}

}  // namespace uavcast::testing
