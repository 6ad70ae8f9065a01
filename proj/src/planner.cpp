#include "uavcast/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uavcast/quality.hpp"

namespace uavcast {

namespace {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Vec7 = Eigen::Matrix<double, 7, 1>;

// Local coordinates of one slot: q (0,1), v (2,3), a (4,5), o (6).
constexpr int kQ = 0;
constexpr int kV = 2;
constexpr int kA = 4;
constexpr int kO = 6;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPsnrScale = 10.0;  // dB per unit of constraint value

Vec2 horiz(const Vec3& v) { return v.head<2>(); }

}  // namespace

SurrogateCoefficients build_surrogate(const Scenario& s, const PowerAllocation& power, const Trajectory& expansion) {
  if (s.channel.alpha != 2.0) throw std::invalid_argument("build_surrogate: requires path-loss exponent 2");
  const int K = s.spectrum.kept;
  if (expansion.slots() < K) throw std::invalid_argument("build_surrogate: expansion trajectory too short");
  const double gamma0 = static_cast<double>(s.spectrum.variances.size()) * s.pixel_peak * s.pixel_peak;
  const double gamma1 = truncation_loss(s.spectrum);

  SurrogateCoefficients c;
  c.expansion.assign(expansion.q.begin() + 1, expansion.q.begin() + 1 + K);
  std::vector<double> unit(K);
  for (int k = 0; k < K; ++k) {
    unit[k] = s.channel.noise_power * s.spectrum.variances[k] / (s.channel.beta0 * std::max(power.p[k], s.p_floor));
  }
  for (const auto& user : s.users) {
    double denom = gamma1;
    for (int k = 0; k < K; ++k) denom += unit[k] * (c.expansion[k] - user.position).squaredNorm();
    c.intercept.push_back(10.0 * std::log10(gamma0 / denom));
    std::vector<double> j(K);
    for (int k = 0; k < K; ++k) j[k] = 10.0 * unit[k] / (std::log(10.0) * denom);
    c.slope.push_back(std::move(j));
  }
  return c;
}

double surrogate_psnr(const SurrogateCoefficients& c, const Scenario& s, const Trajectory& traj, int user) {
  const Vec3& w = s.users.at(user).position;
  double value = c.intercept.at(user);
  const auto& j = c.slope.at(user);
  for (std::size_t k = 0; k < j.size(); ++k) {
    value -= j[k] * ((traj.q[k + 1] - w).squaredNorm() - (c.expansion[k] - w).squaredNorm());
  }
  return value;
}

double velocity_lower_bound(const Vec3& v_r, const Vec3& v) { return v_r.squaredNorm() + 2.0 * v_r.dot(v - v_r); }

double slack_tightness(const Trajectory& traj, const std::vector<double>& o) {
  double worst = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double speed = traj.v[k + 1].norm();
    worst = std::max(worst, std::abs(speed - o[k]) / speed);
  }
  return worst;
}

// ---------------------------------------------------------------------------

TrajectoryProgram::TrajectoryProgram(const Scenario& s, const PowerAllocation& power, const Trajectory& expansion,
                                     const PlannerSettings& settings)
    : scenario_(s),
      slots_(s.spectrum.kept),
      users_(static_cast<int>(s.users.size())),
      per_slot_(settings.trust_region ? 6 : 5),
      trust_(settings.trust_region),
      radius_(settings.trust_radius),
      flight_budget_(s.total_energy - comm_energy(s.coeffs_per_block, s.slot_len, power)),
      surrogate_(build_surrogate(s, power, expansion)) {
  const int K = slots_;
  const double dt = s.slot_len;
  if (expansion.slots() != K) throw std::invalid_argument("TrajectoryProgram: expansion must have K slots");
  if (s.v0.z() != 0.0 || s.a0.z() != 0.0) {
    throw std::invalid_argument("TrajectoryProgram: initial velocity and acceleration must be horizontal");
  }

  for (int k = 1; k <= K; ++k) {
    v_ref_.push_back(horiz(expansion.v[k]));
    q_ref_.push_back(horiz(expansion.q[k]));
  }
  for (int n = 0; n < users_; ++n) {
    const Vec2 w = horiz(s.users[n].position);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += surrogate_.slope[n][k] * (q_ref_[k] - w).squaredNorm();
    ref_sq_dist_.push_back(acc);
  }

  // Rows 4(k-1)..4(k-1)+3: velocity then position recursion for slot k.
  // Rows 4K, 4K+1: q[K] = w_F.
  std::vector<Eigen::Triplet<double>> trip;
  convex::Vector b = convex::Vector::Zero(4 * K + 2);
  const Vec2 v0 = horiz(s.v0), a0 = horiz(s.a0), w0 = horiz(s.start);
  for (int k = 1; k <= K; ++k) {
    const int cur = kSlotVars * (k - 1);
    const int prev = cur - kSlotVars;
    for (int d = 0; d < 2; ++d) {
      const int rv = 4 * (k - 1) + d;
      const int rq = rv + 2;
      trip.emplace_back(rv, cur + kV + d, 1.0);
      trip.emplace_back(rq, cur + kQ + d, 1.0);
      if (k == 1) {
        b(rv) = v0(d) + dt * a0(d);
        b(rq) = w0(d) + dt * v0(d) + 0.5 * dt * dt * a0(d);
      } else {
        trip.emplace_back(rv, prev + kV + d, -1.0);
        trip.emplace_back(rv, prev + kA + d, -dt);
        trip.emplace_back(rq, prev + kQ + d, -1.0);
        trip.emplace_back(rq, prev + kV + d, -dt);
        trip.emplace_back(rq, prev + kA + d, -0.5 * dt * dt);
      }
    }
  }
  const Vec2 wf = horiz(s.end);
  for (int d = 0; d < 2; ++d) {
    trip.emplace_back(4 * K + d, kSlotVars * (K - 1) + kQ + d, 1.0);
    b(4 * K + d) = wf(d);
  }
  convex::SparseMatrix a(4 * K + 2, dimension());
  a.setFromTriplets(trip.begin(), trip.end());
  set_equalities(std::move(a), std::move(b));
}

void TrajectoryProgram::objective_derivatives(const convex::Vector&, convex::Vector& grad, convex::Matrix* hess) const {
  grad = convex::Vector::Zero(dimension());
  grad(mu_index()) = -1.0;
  if (hess) hess->setZero(dimension(), dimension());
}

void TrajectoryProgram::constraint_values(const convex::Vector& x, convex::Vector& g) const {
  const int K = slots_;
  const auto& lim = scenario_.limits;
  const auto& prop = scenario_.propulsion;
  const double dt = scenario_.slot_len;
  const double vs = lim.v_max * lim.v_max;
  const double as = lim.a_max * lim.a_max;
  g.resize(num_inequalities());

  double energy = 0.0;
  bool energy_ok = true;
  for (int i = 0; i < K; ++i) {
    const auto z = x.segment<kSlotVars>(kSlotVars * i);
    const Vec2 q = z.segment<2>(kQ), v = z.segment<2>(kV), a = z.segment<2>(kA);
    const double o = z(kO);
    const Vec2& vr = v_ref_[i];
    const double lin = vr.squaredNorm() + 2.0 * vr.dot(v - vr);
    double* gi = g.data() + i * per_slot_;
    gi[0] = (a.squaredNorm() - as) / as;
    gi[1] = (v.squaredNorm() - vs) / vs;
    gi[2] = (lim.v_min * lim.v_min - lin) / vs;
    gi[3] = (o * o - lin) / vs;
    gi[4] = -o / lim.v_max;
    if (trust_) gi[5] = ((q - q_ref_[i]).squaredNorm() - radius_ * radius_) / (radius_ * radius_);
    if (o > 0.0) {
      const double r = v.norm();
      energy += dt * (prop.c1 * r * r * r + prop.c2 / o * (1.0 + a.squaredNorm() / (prop.g0 * prop.g0)));
    } else {
      energy_ok = false;
    }
  }
  const int e = K * per_slot_;
  g(e) = energy_ok ? (energy - flight_budget_) / scenario_.total_energy : kInf;
  const double mu = x(mu_index());
  for (int n = 0; n < users_; ++n) {
    const Vec2 w = horiz(scenario_.users[n].position);
    double acc = 0.0;
    for (int i = 0; i < K; ++i) {
      acc += surrogate_.slope[n][i] * (x.segment<2>(kSlotVars * i + kQ) - w).squaredNorm();
    }
    g(e + 1 + n) = (mu - surrogate_.intercept[n] + acc - ref_sq_dist_[n]) / kPsnrScale;
  }
}

void TrajectoryProgram::accumulate(const convex::Vector& x, const convex::Vector& w, const convex::Vector* u,
                                   convex::Vector& grad, convex::HessianTerms* terms, const convex::Vector* d,
                                   convex::Vector* jd) const {
  const int K = slots_;
  const auto& lim = scenario_.limits;
  const auto& prop = scenario_.propulsion;
  const double dt = scenario_.slot_len;
  const double vs = lim.v_max * lim.v_max;
  const double as = lim.a_max * lim.a_max;
  const double rs = radius_ * radius_;
  const double es = scenario_.total_energy;
  const double g0s = prop.g0 * prop.g0;
  const int e_idx = K * per_slot_;
  const double we = w(e_idx);
  const double ue = terms ? (*u)(e_idx) : 0.0;

  convex::Vector energy_grad;
  if (ue != 0.0) energy_grad = convex::Vector::Zero(dimension());

  for (int i = 0; i < K; ++i) {
    const int off = kSlotVars * i;
    const auto z = x.segment<kSlotVars>(off);
    const Vec2 q = z.segment<2>(kQ), v = z.segment<2>(kV), a = z.segment<2>(kA);
    const double o = z(kO);
    const Vec2& vr = v_ref_[i];
    const int base = i * per_slot_;
    Vec7 lg = Vec7::Zero();
    Mat7 lh = Mat7::Zero();

    const Vec7 dl = d ? Vec7(d->segment<kSlotVars>(off)) : Vec7::Zero();
    auto add = [&](int idx, const Vec7& l) {
      if (jd) (*jd)(base + idx) = l.dot(dl);
      lg += w(base + idx) * l;
      if (terms) lh.noalias() += (*u)(base + idx) * l * l.transpose();
    };
    Vec7 l;

    l.setZero();
    l.segment<2>(kA) = 2.0 * a / as;
    add(0, l);
    lh.block<2, 2>(kA, kA).diagonal().array() += 2.0 * w(base) / as;

    l.setZero();
    l.segment<2>(kV) = 2.0 * v / vs;
    add(1, l);
    lh.block<2, 2>(kV, kV).diagonal().array() += 2.0 * w(base + 1) / vs;

    l.setZero();
    l.segment<2>(kV) = -2.0 * vr / vs;
    add(2, l);

    l.setZero();
    l.segment<2>(kV) = -2.0 * vr / vs;
    l(kO) = 2.0 * o / vs;
    add(3, l);
    lh(kO, kO) += 2.0 * w(base + 3) / vs;

    l.setZero();
    l(kO) = -1.0 / lim.v_max;
    add(4, l);

    if (trust_) {
      l.setZero();
      l.segment<2>(kQ) = 2.0 * (q - q_ref_[i]) / rs;
      add(5, l);
      lh.block<2, 2>(kQ, kQ).diagonal().array() += 2.0 * w(base + 5) / rs;
    }

    // This slot's share of the flight-energy budget.
    {
      const double r = v.norm();
      const double drag = 1.0 + a.squaredNorm() / g0s;
      l.setZero();
      l.segment<2>(kV) = dt * 3.0 * prop.c1 * r * v / es;
      l.segment<2>(kA) = dt * prop.c2 / o * 2.0 * a / g0s / es;
      l(kO) = -dt * prop.c2 / (o * o) * drag / es;
      lg += we * l;
      if (jd) (*jd)(e_idx) += l.dot(dl);
      if (ue != 0.0) energy_grad.segment<kSlotVars>(off) = l;
      if (terms && we != 0.0) {
        if (r > 0.0) {
          const Mat2 hvv = r * Mat2::Identity() + v * v.transpose() / r;
          lh.block<2, 2>(kV, kV) += we * dt * 3.0 * prop.c1 * hvv / es;
        }
        lh.block<2, 2>(kA, kA).diagonal().array() += we * dt * prop.c2 / o * 2.0 / g0s / es;
        const Vec2 hao = -dt * prop.c2 / (o * o) * 2.0 * a / g0s / es;
        lh.block<2, 1>(kA, kO) += we * hao;
        lh.block<1, 2>(kO, kA) += we * hao.transpose();
        lh(kO, kO) += we * 2.0 * dt * prop.c2 / (o * o * o) * drag / es;
      }
    }

    // Surrogate PSNR constraints: local parts.
    for (int n = 0; n < users_; ++n) {
      const double wn = w(e_idx + 1 + n);
      const double jn = surrogate_.slope[n][i];
      const Vec2 lq = 2.0 * jn * (q - horiz(scenario_.users[n].position)) / kPsnrScale;
      lg.segment<2>(kQ) += wn * lq;
      if (jd) (*jd)(e_idx + 1 + n) += lq.dot(dl.segment<2>(kQ));
      lh.block<2, 2>(kQ, kQ).diagonal().array() += wn * 2.0 * jn / kPsnrScale;
    }

    grad.segment<kSlotVars>(off) += lg;
    if (terms) {
      for (int c = 0; c < kSlotVars; ++c) {
        for (int r = 0; r < kSlotVars; ++r) {
          if (lh(r, c) != 0.0) terms->add(off + r, off + c, lh(r, c));
        }
      }
    }
  }

  double mu_grad = 0.0;
  for (int n = 0; n < users_; ++n) mu_grad += w(e_idx + 1 + n) / kPsnrScale;
  if (jd) {
    for (int n = 0; n < users_; ++n) (*jd)(e_idx + 1 + n) += (*d)(mu_index()) / kPsnrScale;
  }
  grad(mu_index()) += mu_grad;

  if (!terms) return;
  if (ue != 0.0) terms->rank_one.emplace_back(ue, std::move(energy_grad));
  for (int n = 0; n < users_; ++n) {
    const double un = (*u)(e_idx + 1 + n);
    if (un == 0.0) continue;
    convex::Vector gn = convex::Vector::Zero(dimension());
    const Vec2 wpos = horiz(scenario_.users[n].position);
    for (int i = 0; i < K; ++i) {
      const int off = kSlotVars * i + kQ;
      gn.segment<2>(off) = 2.0 * surrogate_.slope[n][i] * (x.segment<2>(off) - wpos) / kPsnrScale;
    }
    gn(mu_index()) = 1.0 / kPsnrScale;
    terms->rank_one.emplace_back(un, std::move(gn));
  }
}

void TrajectoryProgram::constraint_directional(const convex::Vector& x, const convex::Vector& d,
                                               convex::Vector& out) const {
  out = convex::Vector::Zero(num_inequalities());
  const convex::Vector w = convex::Vector::Zero(num_inequalities());
  convex::Vector scratch = convex::Vector::Zero(dimension());
  accumulate(x, w, nullptr, scratch, nullptr, &d, &out);
}

void TrajectoryProgram::accumulate_constraints(const convex::Vector& x, const convex::Vector& w,
                                               const convex::Vector* u, convex::Vector& grad,
                                               convex::Matrix* hess) const {
  if (!hess) {
    accumulate(x, w, nullptr, grad, nullptr);
    return;
  }
  convex::HessianTerms terms;
  accumulate(x, w, u, grad, &terms);
  for (const auto& t : terms.entries) (*hess)(t.row(), t.col()) += t.value();
  for (const auto& [c, z] : terms.rank_one) hess->noalias() += c * z * z.transpose();
}

void TrajectoryProgram::accumulate_constraints_sparse(const convex::Vector& x, const convex::Vector& w,
                                                      const convex::Vector& u, convex::Vector& grad,
                                                      convex::HessianTerms& terms) const {
  accumulate(x, w, &u, grad, &terms);
}

convex::Vector TrajectoryProgram::encode(const Trajectory& traj, const std::vector<double>& o, double mu_db) const {
  convex::Vector x(dimension());
  for (int k = 1; k <= slots_; ++k) {
    const int off = kSlotVars * (k - 1);
    x.segment<2>(off + kQ) = horiz(traj.q[k]);
    x.segment<2>(off + kV) = horiz(traj.v[k]);
    x.segment<2>(off + kA) = horiz(traj.a[k]);
    x(off + kO) = o[k - 1];
  }
  x(mu_index()) = mu_db;
  return x;
}

Trajectory TrajectoryProgram::decode(const convex::Vector& x) const {
  const int K = slots_;
  Trajectory t;
  t.q.assign(K + 1, Vec3::Zero());
  t.v.assign(K + 1, Vec3::Zero());
  t.a.assign(K + 1, Vec3::Zero());
  t.q[0] = scenario_.start;
  t.v[0] = scenario_.v0;
  t.a[0] = scenario_.a0;
  for (int k = 1; k <= K; ++k) {
    const int off = kSlotVars * (k - 1);
    t.q[k] = Vec3(x(off + kQ), x(off + kQ + 1), scenario_.altitude);
    t.v[k] = Vec3(x(off + kV), x(off + kV + 1), 0.0);
    t.a[k] = Vec3(x(off + kA), x(off + kA + 1), 0.0);
  }
  return t;
}

// ---------------------------------------------------------------------------

TrajectoryResult solve_trajectory(const Scenario& s, const PowerAllocation& power, const Trajectory& expansion,
                                  const PlannerSettings& settings) {
  const int K = s.spectrum.kept;
  TrajectoryProgram program(s, power, expansion, settings);
  TrajectoryResult result;
  result.traj = expansion;
  result.true_mu_db = min_psnr(s, expansion, power).value_db;
  result.mu_db = result.true_mu_db;
  if (!(program.flight_budget() > 0.0)) {
    result.report.status = convex::SolveStatus::infeasible;
    return result;
  }

  std::vector<double> o0(K);
  for (int k = 0; k < K; ++k) o0[k] = expansion.v[k + 1].norm() * (1.0 - 1e-4);
  const auto& icpt = program.surrogate().intercept;
  const double mu0 = *std::min_element(icpt.begin(), icpt.end()) - 1.0;

  result.report = convex::solve(program, program.encode(expansion, o0, mu0), settings.tol);
  if (result.report.status == convex::SolveStatus::infeasible) {
    result.o = o0;
    return result;
  }

  const convex::Vector& x = result.report.x;
  result.traj = program.decode(x);
  result.mu_db = x(program.mu_index());
  result.o.resize(K);
  for (int k = 1; k <= K; ++k) {
    const double lin = velocity_lower_bound(expansion.v[k], result.traj.v[k]);
    result.o[k - 1] = std::sqrt(std::max(lin, 0.0));
    result.max_step = std::max(result.max_step, (result.traj.q[k] - expansion.q[k]).norm());
  }
  result.true_mu_db = min_psnr(s, result.traj, power).value_db;
  return result;
}

}  // namespace uavcast
