#include "uavcast/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace uavcast {

double distance(const Vec3& q, const Vec3& w) { return (q - w).norm(); }

double avg_gain(const ChannelParams& params, const Vec3& q, const Vec3& w) {
  const double d2 = (q - w).squaredNorm();
  if (!(d2 > 0.0)) throw std::domain_error("avg_gain: zero distance");
  if (params.alpha == 2.0) return params.beta0 / d2;
  return params.beta0 / std::pow(d2, 0.5 * params.alpha);
}

double inst_gain_squared(const ChannelParams& params, const Vec3& q, const Vec3& w) {
  return avg_gain(params, q, w);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace uavcast
