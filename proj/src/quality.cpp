#include "uavcast/quality.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uavcast {

double truncation_loss(const BlockSpectrum& spectrum) {
  const auto& lambda = spectrum.variances;
  if (spectrum.kept > static_cast<int>(lambda.size())) {
    throw std::invalid_argument("truncation_loss: kept exceeds block count");
  }
  return std::accumulate(lambda.begin() + spectrum.kept, lambda.end(), 0.0);
}

std::vector<double> noise_weights(const Scenario& s, const Trajectory& traj, int user) {
  const int K = s.spectrum.kept;
  if (traj.slots() < K) throw std::invalid_argument("noise_weights: trajectory shorter than kept blocks");
  const Vec3& w = s.users.at(user).position;
  std::vector<double> omega(K);
  for (int k = 1; k <= K; ++k) {
    omega[k - 1] = s.channel.noise_power * s.spectrum.variances[k - 1] / inst_gain_squared(s.channel, traj.q[k], w);
  }
  return omega;
}

DistortionBreakdown expected_distortion(const Scenario& s, const Trajectory& traj, const PowerAllocation& power,
                                        int user) {
  const int K = s.spectrum.kept;
  if (static_cast<int>(power.p.size()) < K) throw std::invalid_argument("expected_distortion: power too short");
  DistortionBreakdown d;
  d.noise_term = noise_weights(s, traj, user);
  double noise_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    d.noise_term[k] /= std::max(power.p[k], s.p_floor);
    noise_sum += d.noise_term[k];
  }
  d.truncation_term = truncation_loss(s.spectrum);
  d.total = s.coeffs_per_block * (noise_sum + d.truncation_term);
  return d;
}

double mse(const Scenario& s, const Trajectory& traj, const PowerAllocation& power, int user) {
  const auto d = expected_distortion(s, traj, power, user);
  return d.total / (static_cast<double>(s.coeffs_per_block) * static_cast<double>(s.spectrum.variances.size()));
}

double psnr_from_mse(double mse_value, double peak) {
  if (!(mse_value > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const Scenario& s, const Trajectory& traj, const PowerAllocation& power, int user) {
  return psnr_from_mse(mse(s, traj, power, user), s.pixel_peak);
}

double psnr_closed_form(const Scenario& s, const Trajectory& traj, const PowerAllocation& power, int user) {
  const int K = s.spectrum.kept;
  const Vec3& w = s.users.at(user).position;
  double denom = truncation_loss(s.spectrum);
  for (int k = 1; k <= K; ++k) {
    const double d2 = (traj.q[k] - w).squaredNorm();
    denom += s.channel.noise_power * s.spectrum.variances[k - 1] * d2 / (s.channel.beta0 * power.p[k - 1]);
  }
  const double numer = static_cast<double>(s.spectrum.variances.size()) * s.pixel_peak * s.pixel_peak;
  return 10.0 * std::log10(numer / denom);
}

std::vector<double> all_psnr(const Scenario& s, const Trajectory& traj, const PowerAllocation& power) {
  std::vector<double> out(s.users.size());
  for (std::size_t n = 0; n < s.users.size(); ++n) out[n] = psnr(s, traj, power, static_cast<int>(n));
  return out;
}

MinPsnr min_psnr(const Scenario& s, const Trajectory& traj, const PowerAllocation& power) {
  if (s.users.empty()) throw std::invalid_argument("min_psnr: no users");
  MinPsnr best;
  for (std::size_t n = 0; n < s.users.size(); ++n) {
    const double value = psnr(s, traj, power, static_cast<int>(n));
    const bool better = best.user < 0 || value < best.value_db ||
                        (value == best.value_db && s.users[n].id < s.users[best.user].id);
    if (better) best = {value, static_cast<int>(n)};
  }
  return best;
}

}  // namespace uavcast
