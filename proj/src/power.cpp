#include "uavcast/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "uavcast/csv.hpp"
#include "uavcast/quality.hpp"

namespace uavcast {

double PsnrPowerTerm::value(const std::vector<double>& p) const {
  double d = gamma1;
  for (std::size_t k = 0; k < omega.size(); ++k) d += omega[k] / p[k];
  return gamma0 / d;
}

Eigen::VectorXd PsnrPowerTerm::gradient(const std::vector<double>& p) const {
  const std::size_t K = omega.size();
  double d = gamma1;
  for (std::size_t k = 0; k < K; ++k) d += omega[k] / p[k];
  Eigen::VectorXd g(K);
  for (std::size_t k = 0; k < K; ++k) g(k) = gamma0 * omega[k] / (p[k] * p[k] * d * d);
  return g;
}

Eigen::MatrixXd PsnrPowerTerm::hessian(const std::vector<double>& p) const {
  const std::size_t K = omega.size();
  double d = gamma1;
  for (std::size_t k = 0; k < K; ++k) d += omega[k] / p[k];
  Eigen::VectorXd u(K);
  for (std::size_t k = 0; k < K; ++k) u(k) = omega[k] / (p[k] * p[k]);
  Eigen::MatrixXd h = (2.0 * gamma0 / (d * d * d)) * u * u.transpose();
  for (std::size_t k = 0; k < K; ++k) h(k, k) -= 2.0 * gamma0 * omega[k] / (p[k] * p[k] * p[k] * d * d);
  return h;
}

PsnrPowerTerm make_power_term(const Scenario& s, const Trajectory& traj, int user) {
  PsnrPowerTerm t;
  t.omega = noise_weights(s, traj, user);
  t.gamma0 = static_cast<double>(s.spectrum.variances.size()) * s.pixel_peak * s.pixel_peak;
  t.gamma1 = truncation_loss(s.spectrum);
  return t;
}

PsnrConstraint psnr_constraint(const Scenario& s, const Trajectory& traj, const PowerAllocation& power, double mu_db,
                               int user) {
  const PsnrPowerTerm term = make_power_term(s, traj, user);
  std::vector<double> p(power.p.begin(), power.p.begin() + s.spectrum.kept);
  for (double& pk : p) pk = std::max(pk, s.p_floor);
  const double tau = std::pow(10.0, mu_db / 10.0);
  PsnrConstraint c;
  c.value = tau - term.value(p);
  c.grad_p = -term.gradient(p);
  c.hess_p = -term.hessian(p);
  c.d_mu = tau * std::log(10.0) / 10.0;
  return c;
}

double comm_budget(const Scenario& s, const Trajectory& traj) {
  return std::min(s.max_comm_energy(), s.total_energy - flight_energy(s.propulsion, traj, s.slot_len));
}

// ---------------------------------------------------------------------------

PowerProgram::PowerProgram(const Scenario& s, const Trajectory& traj, double tau_ref)
    : slots_(s.spectrum.kept),
      cap_(s.per_slot_cap),
      p_unit_(s.max_avg_power),
      floor_(s.p_floor / s.max_avg_power),
      energy_per_unit_(s.coeffs_per_block * s.slot_len * s.max_avg_power),
      budget_(comm_budget(s, traj)),
      tau_ref_(tau_ref) {
  for (std::size_t n = 0; n < s.users.size(); ++n) {
    PsnrPowerTerm t = make_power_term(s, traj, static_cast<int>(n));
    // Express omega against normalized powers and phi against tau_ref.
    for (double& w : t.omega) w /= p_unit_;
    t.gamma0 /= tau_ref_;
    terms_.push_back(std::move(t));
  }
}

int PowerProgram::num_inequalities() const {
  return static_cast<int>(terms_.size()) + 1 + slots_ * (cap_ ? 2 : 1);
}

void PowerProgram::objective_derivatives(const convex::Vector&, convex::Vector& grad, convex::Matrix* hess) const {
  grad = convex::Vector::Zero(slots_ + 1);
  grad(slots_) = -1.0;
  if (hess) hess->setZero(slots_ + 1, slots_ + 1);
}

// Layout: users, budget, floors, caps.
void PowerProgram::constraint_values(const convex::Vector& x, convex::Vector& g) const {
  g.resize(num_inequalities());
  const std::vector<double> p(x.data(), x.data() + slots_);
  const bool positive = std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0; });
  const double scale = std::max(budget_, energy_per_unit_);
  int i = 0;
  for (const auto& t : terms_) g(i++) = positive ? x(slots_) - t.value(p) : std::numeric_limits<double>::infinity();
  g(i++) = (energy_per_unit_ * x.head(slots_).sum() - budget_) / scale;
  for (int k = 0; k < slots_; ++k) g(i++) = floor_ - x(k);
  if (cap_) {
    for (int k = 0; k < slots_; ++k) g(i++) = x(k) - 1.0;
  }
}

void PowerProgram::accumulate_constraints(const convex::Vector& x, const convex::Vector& w, const convex::Vector* u,
                                          convex::Vector& grad, convex::Matrix* hess) const {
  const std::vector<double> p(x.data(), x.data() + slots_);
  const double scale = std::max(budget_, energy_per_unit_);
  const int users = static_cast<int>(terms_.size());
  for (int n = 0; n < users; ++n) {
    const double wn = w(n);
    const double un = hess ? (*u)(n) : 0.0;
    if (wn == 0.0 && un == 0.0) continue;
    convex::Vector gn(slots_ + 1);
    gn.head(slots_) = -terms_[n].gradient(p);
    gn(slots_) = 1.0;
    grad += wn * gn;
    if (hess) {
      hess->topLeftCorner(slots_, slots_) -= wn * terms_[n].hessian(p);
      hess->noalias() += un * gn * gn.transpose();
    }
  }
  const double eb = energy_per_unit_ / scale;
  grad.head(slots_).array() += w(users) * eb;
  if (hess) hess->topLeftCorner(slots_, slots_).array() += (*u)(users) * eb * eb;
  const int floor_base = users + 1;
  const int cap_base = floor_base + slots_;
  for (int k = 0; k < slots_; ++k) {
    grad(k) -= w(floor_base + k);
    if (hess) (*hess)(k, k) += (*u)(floor_base + k);
    if (cap_) {
      grad(k) += w(cap_base + k);
      if (hess) (*hess)(k, k) += (*u)(cap_base + k);
    }
  }
}

// ---------------------------------------------------------------------------

PowerResult solve_power(const Scenario& s, const Trajectory& traj, const PowerAllocation& start,
                        const PowerSettings& settings) {
  const int K = s.spectrum.kept;
  const double energy_per_watt = s.coeffs_per_block * s.slot_len;
  const double budget = comm_budget(s, traj);

  PowerResult result;
  if (budget < energy_per_watt * K * s.p_floor) {
    result.power = start;
    result.mu_db = -std::numeric_limits<double>::infinity();
    result.report.status = convex::SolveStatus::infeasible;
    return result;
  }

  // Strictly interior start: shrink toward the floor until caps and budget
  // hold with margin.
  const double pmax = s.max_avg_power;
  std::vector<double> p0(K);
  for (int k = 0; k < K; ++k) {
    double pk = k < static_cast<int>(start.p.size()) ? start.p[k] : pmax;
    if (s.per_slot_cap) pk = std::min(pk, pmax * (1.0 - 1e-3));
    p0[k] = std::max(pk, 2.0 * s.p_floor);
  }
  const double e0 = energy_per_watt * std::accumulate(p0.begin(), p0.end(), 0.0);
  const double target = budget * (1.0 - 1e-3);
  if (e0 > target) {
    const double fl = 1.01 * s.p_floor;
    const double excess = energy_per_watt * K * fl;
    const double c = std::max(0.0, (target - excess) / (e0 - excess));
    for (double& pk : p0) pk = fl + c * (pk - fl);
  }

  double tau0 = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < s.users.size(); ++n) {
    tau0 = std::min(tau0, make_power_term(s, traj, static_cast<int>(n)).value(p0));
  }

  PowerProgram program(s, traj, tau0);
  convex::Vector x0(K + 1);
  for (int k = 0; k < K; ++k) x0(k) = p0[k] / pmax;
  x0(K) = 0.99;

  result.report = convex::solve(program, x0, settings.tol);
  if (result.report.status == convex::SolveStatus::infeasible) {
    result.power = start;
    result.mu_db = -std::numeric_limits<double>::infinity();
    return result;
  }

  // Every PSNR increases in every p_k, so scaling the barrier solution up to
  // the nearest binding bound can only help.
  std::vector<double> p(K);
  for (int k = 0; k < K; ++k) p[k] = std::max(result.report.x(k) * pmax, s.p_floor);
  double c = budget / (energy_per_watt * std::accumulate(p.begin(), p.end(), 0.0));
  if (s.per_slot_cap) c = std::min(c, pmax / *std::max_element(p.begin(), p.end()));
  if (c > 1.0) {
    for (double& pk : p) pk *= c;
  }
  if (s.per_slot_cap) {
    for (double& pk : p) pk = std::min(pk, pmax);
    // Leftover budget goes to the uncapped slots, largest variance first.
    double spare = budget / energy_per_watt - std::accumulate(p.begin(), p.end(), 0.0);
    for (int k = 0; k < K && spare > 0.0; ++k) {
      const double add = std::min(spare, pmax - p[k]);
      p[k] += add;
      spare -= add;
    }
  }
  result.power.p = std::move(p);

  result.mu_db = min_psnr(s, traj, result.power).value_db;
  return result;
}

void write_power_csv(std::ostream& os, const Scenario& s, const PowerAllocation& power) {
  CsvWriter csv(os);
  csv.row("slot", "lambda", "p_w");
  for (std::size_t k = 0; k < power.p.size(); ++k) csv.row(k + 1, s.spectrum.variances[k], power.p[k]);
}

}  // namespace uavcast
