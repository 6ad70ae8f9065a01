#pragma once

#include <vector>

#include "uavcast/scenario.hpp"

namespace uavcast {

/// Expected reconstruction distortion of one user, split into the channel
/// noise contribution per transmitted slot and the loss from discarded blocks.
struct DistortionBreakdown {
  std::vector<double> noise_term;  // sigma^2 lambda_k / (h_k^2 p_k), k = 1..K
  double truncation_term = 0.0;    // sum of lambda_m over discarded blocks
  double total = 0.0;              // N_p (sum(noise_term) + truncation_term)
};

/// Sum of the variances of blocks kept+1..M.
double truncation_loss(const BlockSpectrum& spectrum);

/// omega[k-1] = sigma^2 lambda_k / h_k^2, the per-slot noise weight before
/// division by p_k. `user` indexes scenario.users.
std::vector<double> noise_weights(const Scenario& scenario, const Trajectory& traj, int user);

DistortionBreakdown expected_distortion(const Scenario& scenario, const Trajectory& traj,
                                        const PowerAllocation& power, int user);

double mse(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power, int user);

/// 10 log10(peak^2 / mse); +infinity for mse == 0.
double psnr_from_mse(double mse, double peak);

double psnr(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power, int user);

/// Closed form 10 log10(M peak^2 / (sum sigma^2 lambda_k d^2 / (beta0 p_k) + trunc))
/// for the alpha = 2 channel, evaluated without going through mse().
double psnr_closed_form(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power,
                        int user);

struct MinPsnr {
  double value_db = 0.0;
  int user = -1;  // index into scenario.users
};

/// Worst user; ties go to the lowest user id. Throws on an empty user set.
MinPsnr min_psnr(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power);

std::vector<double> all_psnr(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power);

}  // namespace uavcast
