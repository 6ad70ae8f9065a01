#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "support.hpp"
#include "uavcast/power.hpp"
#include "uavcast/quality.hpp"

using namespace uavcast;

namespace {

// Circle of radius r around the user's ground position, so every slot has the
// same distance sqrt(r^2 + H^2).
Trajectory circle_around(const Scenario& s, const Vec3& user, double r, double speed) {
  Trajectory t;
  const int K = s.slots;
  const double w = speed / r;
  for (int k = 0; k <= K; ++k) {
    const double th = w * k * s.slot_len;
    t.q.push_back(user + Vec3(r * std::cos(th), r * std::sin(th), s.altitude));
    t.v.push_back(Vec3(-speed * std::sin(th), speed * std::cos(th), 0));
    t.a.push_back(Vec3(-speed * w * std::cos(th), -speed * w * std::sin(th), 0));
  }
  return t;
}

double energy_of(const Scenario& s, const PowerAllocation& p) {
  return s.coeffs_per_block * s.slot_len * std::accumulate(p.p.begin(), p.p.end(), 0.0);
}

}  // namespace

TEST_SUITE("power") {
  TEST_CASE("constant distance without caps gives powers proportional to the standard deviation") {
    Scenario s = testing::small_scenario(60, {{500, 500, 0}});
    s.per_slot_cap = false;
    const Trajectory traj = circle_around(s, s.users[0].position, 200.0, 20.0);
    const auto r = solve_power(s, traj, initial_solution(s).second);
    REQUIRE(r.report.status == convex::SolveStatus::optimal);
    const double ratio0 = r.power.p[0] / std::sqrt(s.spectrum.variances[0]);
    for (int k = 0; k < s.slots; ++k) {
      CHECK(r.power.p[k] / std::sqrt(s.spectrum.variances[k]) == doctest::Approx(ratio0).epsilon(0.01));
    }
    CHECK(energy_of(s, r.power) == doctest::Approx(s.max_comm_energy()).epsilon(1e-6));
  }

  TEST_CASE("identical slots receive identical power") {
    Scenario s = testing::small_scenario(2, {{150, 150, 0}});
    s.slot_len = 12.0;
    s.total_energy = 1e5;
    s.spectrum.variances = {5.0, 5.0, 1.0};
    s.per_slot_cap = false;
    refresh_derived(s);
    const Trajectory traj = circle_around(s, s.users[0].position, 100.0, 10.0);
    const auto r = solve_power(s, traj, initial_solution(s).second);
    REQUIRE(r.report.status == convex::SolveStatus::optimal);
    CHECK(r.power.p[0] == doctest::Approx(r.power.p[1]).epsilon(1e-7));
  }

  TEST_CASE("two slots against a simplex grid") {
    Scenario s = testing::small_scenario(2, {{40, 120, 0}, {260, 10, 0}});
    s.slot_len = 12.0;
    s.total_energy = 1e5;
    s.per_slot_cap = false;
    refresh_derived(s);
    const auto [traj, start] = initial_solution(s);
    const auto r = solve_power(s, traj, start);
    REQUIRE(r.report.status == convex::SolveStatus::optimal);
    CHECK(r.report.kkt_residual <= 1e-6);

    const double total = comm_budget(s, traj) / (s.coeffs_per_block * s.slot_len);
    double best = -1e300;
    for (int i = 1; i < 10000; ++i) {
      const double p1 = total * i * 1e-4;
      best = std::max(best, min_psnr(s, traj, PowerAllocation{{p1, total - p1}}).value_db);
    }
    CHECK(std::abs(r.mu_db - best) <= 1e-3);
    CHECK(r.mu_db >= best - 1e-9);
  }

  TEST_CASE("phi derivatives on the two-block toy") {
    PsnrPowerTerm t;
    t.omega = {4.0};
    t.gamma0 = 2 * 255.0 * 255.0;
    t.gamma1 = 1.0;
    const std::vector<double> p{1.0};
    const double hand = t.gamma0 * 4.0 / (1.0 * std::pow(4.0 / 1.0 + 1.0, 2));
    CHECK(t.gradient(p)(0) == doctest::Approx(hand).epsilon(1e-14));
    CHECK(t.value(p) == doctest::Approx(t.gamma0 / 5.0).epsilon(1e-14));
  }

  TEST_CASE("phi is concave and its gradient matches central differences") {
    Scenario s = testing::small_scenario(30, {{800, 200, 0}});
    s.slot_len = 0.8;
    refresh_derived(s);
    const auto traj = initial_solution(s).first;
    const auto term = make_power_term(s, traj, 0);
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> p(s.slots);
      for (double& x : p) x = rng.uniform(1e-4, 1e-2);
      const Eigen::MatrixXd h = term.hessian(p);
      CHECK(h.diagonal().maxCoeff() <= 0.0);
      CHECK(h.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff() <= 1e-9 * h.norm());

      const Eigen::VectorXd g = term.gradient(p);
      const int k = static_cast<int>(rng.uniform(0, s.slots));
      const double step = 1e-4 * p[k];
      auto pp = p, pm = p;
      pp[k] += step;
      pm[k] -= step;
      const double fd = (term.value(pp) - term.value(pm)) / (2 * step);
      CHECK(std::abs(fd - g(k)) <= 1e-5 * std::abs(g(k)));
    }
  }

  TEST_CASE("psnr constraint is consistent with phi") {
    Scenario s = testing::small_scenario(20, {{800, 200, 0}, {100, 900, 0}});
    s.slot_len = 1.2;
    refresh_derived(s);
    const auto [traj, power] = initial_solution(s);
    const double mu = 20.0;
    const auto c = psnr_constraint(s, traj, power, mu, 1);
    const auto term = make_power_term(s, traj, 1);
    CHECK(c.value == doctest::Approx(std::pow(10.0, mu / 10.0) - term.value(power.p)).epsilon(1e-12));
    CHECK((c.grad_p + term.gradient(power.p)).norm() <= 1e-12 * c.grad_p.norm());
    CHECK(c.d_mu == doctest::Approx(std::log(10.0) / 10.0 * std::pow(10.0, mu / 10.0)).epsilon(1e-12));
  }

  TEST_CASE("power program gradients") {
    Scenario s = testing::small_scenario(25, {{800, 200, 0}, {100, 900, 0}});
    s.slot_len = 1.0;
    refresh_derived(s);
    const auto traj = initial_solution(s).first;
    PowerProgram prog(s, traj, 100.0);
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
      convex::Vector x(prog.dimension());
      for (int k = 0; k < x.size(); ++k) x(k) = rng.uniform(0.1, 0.9);
      CHECK(convex::check_gradients(prog, x, 1e-7) <= 1e-5);
    }
  }

  TEST_CASE("solve_power improves, saturates a bound and is scale invariant") {
    Scenario s = testing::small_scenario(120, {{900, 100, 0}, {200, 1000, 0}, {600, 600, 0}});
    s.slot_len = 0.15;
    refresh_derived(s);
    auto [traj, start] = initial_solution(s);
    for (double cap : {1.0, 0.0}) {
      s.per_slot_cap = cap > 0.0;
      // Total energy binds: room for a third of the full-power budget.
      s.total_energy = energy_feasible(s, traj, start).flight + s.max_comm_energy() / 3.0;
      PowerAllocation equal{std::vector<double>(s.slots, s.max_avg_power / 3.0)};
      const double before = min_psnr(s, traj, equal).value_db;
      const auto r = solve_power(s, traj, equal);
      REQUIRE(r.report.status == convex::SolveStatus::optimal);
      CHECK(r.mu_db >= before - 1e-9);
      CHECK(r.mu_db == doctest::Approx(min_psnr(s, traj, r.power).value_db).epsilon(1e-12));
      CHECK(energy_feasible(s, traj, r.power).feasible());
      const bool budget_tight = energy_of(s, r.power) >= comm_budget(s, traj) * (1 - 1e-6);
      const bool caps_tight = std::all_of(r.power.p.begin(), r.power.p.end(),
                                          [&](double p) { return p >= s.max_avg_power * (1 - 1e-6); });
      CHECK((budget_tight || caps_tight));

      Scenario scaled = s;
      for (double& l : scaled.spectrum.variances) l *= 37.0;
      const auto rs = solve_power(scaled, traj, equal);
      REQUIRE(rs.report.status == convex::SolveStatus::optimal);
      for (int k = 0; k < s.slots; ++k) CHECK(rs.power.p[k] == doctest::Approx(r.power.p[k]).epsilon(1e-5));
    }
  }

  TEST_CASE("full-power start with ample energy keeps every slot at the cap") {
    Scenario s = testing::small_scenario(180, {{900, 100, 0}});
    auto [traj, start] = initial_solution(s);
    const auto r = solve_power(s, traj, start);
    for (double p : r.power.p) CHECK(p == doctest::Approx(s.max_avg_power).epsilon(1e-9));
  }

  TEST_CASE("infeasible when flight leaves nothing for the power floor") {
    Scenario s = testing::small_scenario(180, {{900, 100, 0}});
    auto [traj, start] = initial_solution(s);
    s.total_energy = energy_feasible(s, traj, start).flight;
    const auto r = solve_power(s, traj, start);
    CHECK(r.report.status == convex::SolveStatus::infeasible);
  }

  TEST_CASE("power CSV") {
    Scenario s = testing::small_scenario(3, {{150, 150, 0}});
    std::ostringstream os;
    write_power_csv(os, s, PowerAllocation{{0.01, 0.02, 0.03}});
    CHECK(os.str().rfind("slot,lambda,p_w\n1,4000,0.01\n", 0) == 0);
  }
}
