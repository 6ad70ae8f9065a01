#include <doctest.h>

#include <cstdlib>

#include "support.hpp"
#include "uavcast/harness.hpp"
#include "uavcast/kinematics.hpp"
#include "uavcast/scenario.hpp"

using namespace uavcast;

namespace {

Scenario defaults_with_users() {
  Scenario s = default_scenario();
  s.users = generate_users(7, 4, {0, 1200}, {0, 1200});
  s.spectrum.variances = testing::geometric_spectrum(192, 1e4, 0.97);
  refresh_derived(s);
  return s;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("defaults are valid at cruise speed 23.57 m/s") {
    const Scenario s = defaults_with_users();
    const auto r = validate(s);
    CHECK(r.ok());
    CHECK(r.cruise_speed == doctest::Approx(23.5702).epsilon(1e-5));
    CHECK(s.max_comm_energy() == doctest::Approx(71.28).epsilon(1e-12));
  }

  TEST_CASE("invalid fields are diagnosed") {
    Scenario s = defaults_with_users();
    s.limits.v_min = s.limits.v_max;
    CHECK_FALSE(validate(s).ok());
    CHECK_THROWS_AS(require_valid(s), std::invalid_argument);

    s = defaults_with_users();
    s.spectrum.variances = {1.0, 2.0};
    s.slots = 2;
    refresh_derived(s);
    CHECK_FALSE(validate(s).ok());

    s = defaults_with_users();
    s.slots = 2;  // 424 m in 0.2 s exceeds v_max
    refresh_derived(s);
    CHECK_FALSE(validate(s).ok());
  }

  TEST_CASE("seeded user generation") {
    const auto a = generate_users(7, 4, {0, 1200}, {0, 1200});
    const auto b = generate_users(7, 4, {0, 1200}, {0, 1200});
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == static_cast<int>(i) + 1);
      CHECK(a[i].position == b[i].position);
      CHECK(a[i].position.x() >= 0.0);
      CHECK(a[i].position.x() <= 1200.0);
      CHECK(a[i].position.y() >= 0.0);
      CHECK(a[i].position.y() <= 1200.0);
      CHECK(a[i].position.z() == 0.0);
    }
    const auto larger = generate_users(7, 10, {0, 1200}, {0, 1200});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(larger[i].position == a[i].position);
    CHECK(generate_users(8, 4, {0, 1200}, {0, 1200})[0].position != a[0].position);
    CHECK_THROWS_AS(generate_users(7, 0, {0, 1200}, {0, 1200}), std::invalid_argument);
  }

  TEST_CASE("straight-line initial solution") {
    const Scenario s = defaults_with_users();
    const auto [traj, power] = initial_solution(s);
    REQUIRE(traj.slots() == 180);
    CHECK((traj.q[90] - Vec3(150, 150, 100)).norm() < 1e-9);
    CHECK((traj.q[180] - s.end).norm() < 1e-9);
    for (int k = 1; k <= 180; ++k) {
      CHECK((traj.v[k] - Vec3(300.0 / 18.0, -300.0 / 18.0, 0)).norm() < 1e-12);
      CHECK(traj.a[k].norm() == 0.0);
    }
    CHECK(traj.v[1].norm() == doctest::Approx(23.5702).epsilon(1e-5));
    for (double p : power.p) CHECK(p == s.max_avg_power);
    CHECK(comm_energy(s.coeffs_per_block, s.slot_len, power) == doctest::Approx(71.28).epsilon(1e-12));
    CHECK(dynamics_residual(traj, s.slot_len).max() < 1e-12);

    const auto e = energy_feasible(s, traj, power);
    CHECK(e.flight == doctest::Approx(1936.6).epsilon(1e-4));
    CHECK(e.comm + e.flight == doctest::Approx(2007.9).epsilon(1e-4));
    CHECK(e.slack == doctest::Approx(992.1).epsilon(1e-4));
    CHECK(e.feasible());
  }

  TEST_CASE("scenario text round trip") {
    const Scenario s = defaults_with_users();
    const Scenario t = scenario_from_text(scenario_to_text(s));
    CHECK(scenario_to_text(t) == scenario_to_text(s));
    REQUIRE(t.users.size() == s.users.size());
    CHECK(t.users[2].position == s.users[2].position);
    CHECK(t.max_avg_power == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(t.channel.noise_power == doctest::Approx(dbm_to_watts(-109.0)).epsilon(1e-14));
  }

  TEST_CASE("scenario parse diagnostics") {
    try {
      scenario_from_text("{\n  \"slots\": 180,\n  \"seed\": \n}", "bad.json");
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      const std::string what = e.what();
      CHECK(what.find("bad.json") != std::string::npos);
      CHECK(what.find("line 4") != std::string::npos);
    }
    CHECK_THROWS_WITH_AS(scenario_from_text("{\"slotz\": 3}", "x.json"), doctest::Contains("unknown key 'slotz'"),
                         std::runtime_error);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), std::runtime_error);
  }

  TEST_CASE("environment overrides any key") {
    ::setenv("UAVCAST_TOTAL_ENERGY_J", "4500", 1);
    const Scenario s = scenario_from_text("{\"total_energy_j\": 3000}");
    ::unsetenv("UAVCAST_TOTAL_ENERGY_J");
    CHECK(s.total_energy == 4500.0);
  }

  TEST_CASE("reference_scenario nests users across sizes") {
    const Scenario four = harness::reference_scenario(5, 4);
    const Scenario ten = harness::reference_scenario(5, 10);
    CHECK(validate(four).ok());
    CHECK(four.spectrum.variances.size() == 192);
    for (int i = 0; i < 4; ++i) CHECK(ten.users[i].position == four.users[i].position);
  }
}
