#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "uavcast/channel.hpp"

using namespace uavcast;

TEST_SUITE("channel") {
  TEST_CASE("distance examples") {
    CHECK(distance({0, 300, 100}, {0, 300, 0}) == doctest::Approx(100.0));
    CHECK(distance({0, 300, 100}, {0, 0, 0}) == doctest::Approx(316.227766).epsilon(1e-8));
    CHECK(distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  }

  TEST_CASE("average gain examples") {
    ChannelParams p;
    p.beta0 = 1e-4;
    p.alpha = 2.0;
    CHECK(avg_gain(p, {0, 0, 100}, {0, 0, 0}) == doctest::Approx(1e-8).epsilon(1e-12));
    CHECK(avg_gain(p, {0, 0, 1}, {0, 0, 0}) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(avg_gain(p, {0, 300, 100}, {0, 0, 0}) == doctest::Approx(1e-9).epsilon(1e-9));
    CHECK_THROWS_AS(avg_gain(p, {1, 1, 1}, {1, 1, 1}), std::domain_error);
  }

  TEST_CASE("instantaneous gain equals the average gain") {
    ChannelParams p;
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const Vec3 q = testing::random_point(rng, -500, 500, 100);
      const Vec3 w = testing::random_point(rng, -500, 500, 0);
      CHECK(inst_gain_squared(p, q, w) == avg_gain(p, q, w));
    }
  }

  TEST_CASE("unit conversions") {
    CHECK(dbm_to_watts(10.0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(dbm_to_watts(-109.0) == doctest::Approx(1.2589e-14).epsilon(1e-4));
    CHECK(db_to_linear(0.0) == 1.0);
    for (double x = -120.0; x <= 40.0; x += 7.3) {
      CHECK(watts_to_dbm(dbm_to_watts(x)) == doctest::Approx(x).epsilon(1e-12));
      CHECK(linear_to_db(db_to_linear(x)) == doctest::Approx(x).epsilon(1e-12));
    }
  }

  TEST_CASE("gain decreases strictly with distance") {
    ChannelParams p;
    for (double alpha : {2.0, 3.0, 6.0}) {
      p.alpha = alpha;
      double prev = avg_gain(p, {0, 0, 1}, {0, 0, 0});
      for (double d = 1.5; d < 2000.0; d *= 1.5) {
        const double g = avg_gain(p, {0, 0, d}, {0, 0, 0});
        CHECK(g < prev);
        prev = g;
      }
    }
  }

  TEST_CASE("distance is symmetric and satisfies the triangle inequality") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 a = testing::random_point(rng, -1000, 1000, rng.uniform(0, 200));
      const Vec3 b = testing::random_point(rng, -1000, 1000, rng.uniform(0, 200));
      const Vec3 c = testing::random_point(rng, -1000, 1000, rng.uniform(0, 200));
      CHECK(distance(a, b) == distance(b, a));
      CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
    }
  }
}
