#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "uavcast/power.hpp"
#include "uavcast/quality.hpp"

using namespace uavcast;

namespace {

// One slot, user straight below the UAV with h^2 = 1, sigma^2 = 1, N_p = 1,
// lambda = [4, 1], kept = 1.
struct Toy {
  Scenario s;
  Trajectory traj;
  PowerAllocation power{{1.0}};
};

Toy toy() {
  Toy t;
  Scenario& s = t.s;
  s = default_scenario();
  s.slots = 1;
  s.slot_len = 30.0;
  s.start = {0, 0, 100};
  s.end = {300, 0, 100};
  s.coeffs_per_block = 1;
  s.max_avg_power = 2.0;
  s.channel.beta0 = 1e4;
  s.channel.noise_power = 1.0;
  s.spectrum.variances = {4.0, 1.0};
  s.users = {{1, {300, 0, 0}}};
  refresh_derived(s);
  t.traj = initial_solution(s).first;
  return t;
}

}  // namespace

TEST_SUITE("quality") {
  TEST_CASE("toy distortion, MSE and PSNR") {
    const Toy t = toy();
    REQUIRE(inst_gain_squared(t.s.channel, t.traj.q[1], t.s.users[0].position) == doctest::Approx(1.0));
    const auto d = expected_distortion(t.s, t.traj, t.power, 0);
    REQUIRE(d.noise_term.size() == 1);
    CHECK(d.noise_term[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(d.truncation_term == doctest::Approx(1.0));
    CHECK(d.total == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(mse(t.s, t.traj, t.power, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(psnr(t.s, t.traj, t.power, 0) == doctest::Approx(10 * std::log10(26010.0)).epsilon(1e-12));
    CHECK(psnr(t.s, t.traj, t.power, 0) == doctest::Approx(44.151404).epsilon(1e-7));
  }

  TEST_CASE("psnr_from_mse") {
    CHECK(psnr_from_mse(255.0 * 255.0, 255.0) == doctest::Approx(0.0));
    CHECK(psnr_from_mse(2.5, 255.0) == doctest::Approx(44.151404).epsilon(1e-7));
    CHECK(std::isinf(psnr_from_mse(0.0, 255.0)));
  }

  TEST_CASE("truncation, zero spectrum and power scaling") {
    Toy t = toy();
    t.s.spectrum.variances = {4.0};
    CHECK(truncation_loss(t.s.spectrum) == 0.0);
    t.s.spectrum.variances = {0.0, 0.0};
    CHECK(mse(t.s, t.traj, t.power, 0) == 0.0);

    Scenario s = testing::small_scenario(180, {{900, 700, 0}});
    auto [traj, power] = initial_solution(s);
    const auto before = expected_distortion(s, traj, power, 0);
    PowerAllocation doubled = power;
    for (double& p : doubled.p) p *= 2.0;
    const auto after = expected_distortion(s, traj, doubled, 0);
    for (std::size_t k = 0; k < before.noise_term.size(); ++k) {
      CHECK(after.noise_term[k] == doctest::Approx(before.noise_term[k] / 2.0).epsilon(1e-14));
    }
    CHECK(mse(s, traj, power, 0) * s.coeffs_per_block * s.spectrum.variances.size() ==
          doctest::Approx(before.total).epsilon(1e-12));
  }

  TEST_CASE("closed form agrees with the composition") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      Scenario s = testing::small_scenario(60, {testing::random_point(rng, 0, 1200, 0)});
      s.slot_len = 0.3;
      refresh_derived(s);
      auto [traj, power] = initial_solution(s);
      for (int k = 1; k <= s.slots; ++k) traj.q[k] += Vec3(rng.uniform(-50, 50), rng.uniform(-50, 50), 0);
      for (double& p : power.p) p = rng.uniform(1e-4, 1e-2);
      const double composed = psnr_from_mse(mse(s, traj, power, 0), s.pixel_peak);
      CHECK(std::abs(psnr_closed_form(s, traj, power, 0) - composed) < 1e-12 * std::abs(composed) + 1e-12);
    }
  }

  TEST_CASE("min_psnr picks the worst user with lowest-id ties") {
    Scenario s = testing::small_scenario(180, {{150, 150, 0}});
    auto [traj, power] = initial_solution(s);
    CHECK(min_psnr(s, traj, power).value_db == psnr(s, traj, power, 0));

    // Mirror images across the flight line have identical geometry.
    s.users = {{1, {250, 250, 0}}, {2, {50, 50, 0}}};
    CHECK(psnr(s, traj, power, 0) == doctest::Approx(psnr(s, traj, power, 1)).epsilon(1e-12));
    s.users = {{1, {250, 250, 0}}, {2, {250, 250, 0}}};
    CHECK(min_psnr(s, traj, power).user == 0);

    s.users = generate_users(7, 4, {0, 1200}, {0, 1200});
    int farthest = 0;
    double far = 0.0;
    for (std::size_t n = 0; n < s.users.size(); ++n) {
      double sum = 0.0;
      for (int k = 1; k <= s.slots; ++k) sum += (traj.q[k] - s.users[n].position).squaredNorm();
      if (sum > far) {
        far = sum;
        farthest = static_cast<int>(n);
      }
    }
    CHECK(min_psnr(s, traj, power).user == farthest);
    CHECK_THROWS_AS(min_psnr(Scenario{}, traj, power), std::invalid_argument);
  }

  TEST_CASE("PSNR is monotone in power and distance") {
    Scenario s = testing::small_scenario(100, {{700, 400, 0}});
    auto [traj, power] = initial_solution(s);
    Rng rng(5);
    const double base = psnr(s, traj, power, 0);
    for (int i = 0; i < 200; ++i) {
      const int k = static_cast<int>(rng.uniform(0, s.slots));
      PowerAllocation more = power;
      more.p[k] *= 1.0 + rng.uniform(0.01, 1.0);
      CHECK(psnr(s, traj, more, 0) > base);

      Trajectory away = traj;
      const Vec3 dir = (traj.q[k + 1] - s.users[0].position).cwiseProduct(Vec3(1, 1, 0)).normalized();
      away.q[k + 1] += rng.uniform(1.0, 50.0) * dir;
      CHECK(psnr(s, away, power, 0) < base);
    }
  }

  TEST_CASE("linear PSNR is concave in power") {
    Scenario s = testing::small_scenario(40, {{500, 900, 0}});
    s.slot_len = 0.5;
    refresh_derived(s);
    const auto traj = initial_solution(s).first;
    const auto term = make_power_term(s, traj, 0);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> a(s.slots), b(s.slots), mix(s.slots);
      for (int k = 0; k < s.slots; ++k) {
        a[k] = rng.uniform(1e-5, 1e-2);
        b[k] = rng.uniform(1e-5, 1e-2);
      }
      const double t = rng.uniform(0, 1);
      for (int k = 0; k < s.slots; ++k) mix[k] = t * a[k] + (1 - t) * b[k];
      CHECK(term.value(mix) >= t * term.value(a) + (1 - t) * term.value(b) - 1e-9);
    }
  }
}
