#pragma once

#include <vector>

#include "uavcast/convex.hpp"
#include "uavcast/scenario.hpp"

namespace uavcast {

/// First-order lower bound of every user's PSNR in the squared distances
/// ||q[k] - w_n||^2 around an expansion trajectory:
///   PSNR_n(Q) >= I_n - sum_k J_n[k] (||q[k] - w_n||^2 - ||q_r[k] - w_n||^2).
struct SurrogateCoefficients {
  std::vector<double> intercept;            // I_n, dB
  std::vector<std::vector<double>> slope;   // J_n[k], dB / m^2, [user][k - 1]
  std::vector<Vec3> expansion;              // q_r[1..K] at index k - 1
};

/// Requires the alpha = 2 channel.
SurrogateCoefficients build_surrogate(const Scenario& scenario, const PowerAllocation& power,
                                      const Trajectory& expansion);

/// Surrogate PSNR of one user along `traj`.
double surrogate_psnr(const SurrogateCoefficients& coeffs, const Scenario& scenario, const Trajectory& traj,
                      int user);

/// ||v_r||^2 + 2 v_r^T (v - v_r), a global under-estimator of ||v||^2.
double velocity_lower_bound(const Vec3& v_r, const Vec3& v);

struct PlannerSettings {
  bool trust_region = true;
  double trust_radius = 50.0;  // m, per-slot cap on ||q[k] - q_r[k]||
  convex::Tolerances tol;
};

/// The convexified trajectory program with power fixed, over the horizontal
/// components of every slot's position, velocity and acceleration plus the
/// slack speeds and mu:
///   x = [q[1], v[1], a[1], o[1], ..., q[K], v[K], a[K], o[K], mu]
/// (7 entries per slot). The dynamics and both endpoints are linear
/// equalities. Constraint layout: per slot (accel, v_max, v_min, slack,
/// slack sign[, trust]), then the flight-energy budget, then one surrogate
/// PSNR constraint per user. Each constraint is normalized to unit scale.
class TrajectoryProgram : public convex::SmoothConvexProgram {
 public:
  TrajectoryProgram(const Scenario& scenario, const PowerAllocation& power, const Trajectory& expansion,
                    const PlannerSettings& settings);

  static constexpr int kSlotVars = 7;

  int dimension() const override { return kSlotVars * slots_ + 1; }
  int num_inequalities() const override { return slots_ * per_slot_ + 1 + users_; }
  double objective(const convex::Vector& x) const override { return -x(mu_index()); }
  void objective_derivatives(const convex::Vector& x, convex::Vector& grad, convex::Matrix* hess) const override;
  void constraint_values(const convex::Vector& x, convex::Vector& g) const override;
  void accumulate_constraints(const convex::Vector& x, const convex::Vector& w, const convex::Vector* u,
                              convex::Vector& grad, convex::Matrix* hess) const override;
  void constraint_directional(const convex::Vector& x, const convex::Vector& d, convex::Vector& out) const override;
  bool has_sparse_hessian() const override { return true; }
  void accumulate_constraints_sparse(const convex::Vector& x, const convex::Vector& w, const convex::Vector& u,
                                     convex::Vector& grad, convex::HessianTerms& terms) const override;
  void objective_hessian_sparse(const convex::Vector&, double, convex::HessianTerms&) const override {}

  /// Decision vector for a trajectory, slack speeds and mu.
  convex::Vector encode(const Trajectory& traj, const std::vector<double>& o, double mu_db) const;
  /// Full trajectory (index 0 = boundary conditions) from a decision vector.
  Trajectory decode(const convex::Vector& x) const;

  int mu_index() const { return kSlotVars * slots_; }
  const SurrogateCoefficients& surrogate() const { return surrogate_; }
  double flight_budget() const { return flight_budget_; }

 private:
  // With d and jd given, also writes jd_i = grad g_i^T d.
  void accumulate(const convex::Vector& x, const convex::Vector& w, const convex::Vector* u, convex::Vector& grad,
                  convex::HessianTerms* terms, const convex::Vector* d = nullptr, convex::Vector* jd = nullptr) const;

  const Scenario& scenario_;
  int slots_;
  int users_;
  int per_slot_;
  bool trust_;
  double radius_;
  double flight_budget_;  // E_t - E_c
  SurrogateCoefficients surrogate_;
  std::vector<Eigen::Vector2d> v_ref_;  // v_r[1..K]
  std::vector<Eigen::Vector2d> q_ref_;
  std::vector<double> ref_sq_dist_;     // sum_k J_n[k] ||q_r[k] - w_n||^2 per user
};

struct TrajectoryResult {
  Trajectory traj;
  std::vector<double> o;   // slack speeds o[1..K] at index k - 1
  double mu_db = 0.0;      // surrogate optimum
  double true_mu_db = 0.0; // min-PSNR re-evaluated on the returned trajectory
  double max_step = 0.0;   // max_k ||q[k] - q_r[k]||
  convex::SolveReport report;
};

/// One convexified trajectory step around `expansion`. The slack speeds are
/// returned tightened to o[k] = sqrt(||v_r||^2 + 2 v_r^T (v - v_r)), the
/// largest value the slack constraint admits.
TrajectoryResult solve_trajectory(const Scenario& scenario, const PowerAllocation& power,
                                  const Trajectory& expansion, const PlannerSettings& settings = {});

/// max_k | ||v[k]|| - o[k] | / ||v[k]||.
double slack_tightness(const Trajectory& traj, const std::vector<double>& o);

}  // namespace uavcast
