#pragma once

#include <iosfwd>
#include <vector>

#include "uavcast/convex.hpp"
#include "uavcast/scenario.hpp"

namespace uavcast {

/// phi(P) = gamma0 / (sum_k omega_k / p_k + gamma1) for one user, where
/// omega_k = sigma^2 lambda_k / h_k^2 for the fixed trajectory. phi is the
/// linear-scale PSNR 10^(PSNR/10) and is concave in P.
struct PsnrPowerTerm {
  std::vector<double> omega;
  double gamma0 = 0.0;  // M eta^2
  double gamma1 = 0.0;  // truncation loss

  double value(const std::vector<double>& p) const;
  /// d phi / d p_k = gamma0 omega_k / (p_k^2 D^2), D = sum omega / p + gamma1.
  Eigen::VectorXd gradient(const std::vector<double>& p) const;
  Eigen::MatrixXd hessian(const std::vector<double>& p) const;
};

PsnrPowerTerm make_power_term(const Scenario& scenario, const Trajectory& traj, int user);

/// Value and derivatives of 10^(mu/10) - phi_n(P). Derivatives with respect
/// to P are in watts; d_mu is the derivative with respect to mu in dB.
struct PsnrConstraint {
  double value = 0.0;
  Eigen::VectorXd grad_p;
  Eigen::MatrixXd hess_p;
  double d_mu = 0.0;
};

PsnrConstraint psnr_constraint(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& power,
                               double mu_db, int user);

/// Energy available for communication with the trajectory fixed:
/// min(E_max, E_t - E_f).
double comm_budget(const Scenario& scenario, const Trajectory& traj);

/// Max-min PSNR over P with the trajectory fixed, posed over
/// x = [p_1 / Pmax, ..., p_K / Pmax, tau / tau_ref] where tau = 10^(mu/10).
/// Every constraint is normalized to unit scale.
class PowerProgram : public convex::SmoothConvexProgram {
 public:
  PowerProgram(const Scenario& scenario, const Trajectory& traj, double tau_ref);

  int dimension() const override { return slots_ + 1; }
  int num_inequalities() const override;
  double objective(const convex::Vector& x) const override { return -x(slots_); }
  void objective_derivatives(const convex::Vector& x, convex::Vector& grad, convex::Matrix* hess) const override;
  void constraint_values(const convex::Vector& x, convex::Vector& g) const override;
  void accumulate_constraints(const convex::Vector& x, const convex::Vector& w, const convex::Vector* u,
                              convex::Vector& grad, convex::Matrix* hess) const override;

  double budget() const { return budget_; }
  double tau_ref() const { return tau_ref_; }
  double power_unit() const { return p_unit_; }
  const std::vector<PsnrPowerTerm>& terms() const { return terms_; }

 private:
  int slots_;
  bool cap_;
  double p_unit_;
  double floor_;          // p_floor / Pmax
  double energy_per_unit_;  // N_p dt Pmax
  double budget_;
  double tau_ref_;
  std::vector<PsnrPowerTerm> terms_;
};

struct PowerSettings {
  convex::Tolerances tol;
};

struct PowerResult {
  PowerAllocation power;
  double mu_db = 0.0;  // true min-PSNR at the returned allocation
  convex::SolveReport report;
};

/// Optimal power allocation for a fixed trajectory. Reports status
/// infeasible when E_t < E_f + N_p dt K p_floor.
PowerResult solve_power(const Scenario& scenario, const Trajectory& traj, const PowerAllocation& start,
                        const PowerSettings& settings = {});

/// Columns slot, lambda, p_w.
void write_power_csv(std::ostream& os, const Scenario& scenario, const PowerAllocation& power);

}  // namespace uavcast
