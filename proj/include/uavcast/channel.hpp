#pragma once

#include <Eigen/Core>

namespace uavcast {

using Vec3 = Eigen::Vector3d;

/// Line-of-sight channel: average power gain beta0 / d^alpha with the
/// small-scale component fixed to one.
struct ChannelParams {
  double beta0 = 1e-4;          // linear gain at 1 m
  double alpha = 2.0;           // path-loss exponent
  double noise_power = 0.0;     // W
};

double distance(const Vec3& q, const Vec3& w);

/// Throws std::domain_error when q == w.
double avg_gain(const ChannelParams& params, const Vec3& q, const Vec3& w);

/// h^2 with g = 1, i.e. identical to avg_gain.
double inst_gain_squared(const ChannelParams& params, const Vec3& q, const Vec3& w);

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);
double linear_to_db(double ratio);

}  // namespace uavcast
