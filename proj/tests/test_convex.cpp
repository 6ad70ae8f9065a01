#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "uavcast/convex.hpp"
#include "uavcast/rng.hpp"

using namespace uavcast;
using convex::Matrix;
using convex::Vector;

namespace {

convex::SmoothFunction quadratic(Matrix q, Vector c, double r = 0.0) {
  // 0.5 x^T Q x + c^T x + r
  return {[q, c, r](const Vector& x) { return 0.5 * x.dot(q * x) + c.dot(x) + r; },
          [q, c](const Vector& x) -> Vector { return q * x + c; }, [q](const Vector&) -> Matrix { return q; }};
}

convex::SmoothFunction linear(Vector c, double r) { return quadratic(Matrix::Zero(c.size(), c.size()), c, r); }

// min sum omega_k / p_k  s.t.  sum p <= budget,  p >= floor
convex::ExplicitProgram inverse_sum(const Vector& omega, double budget, double floor) {
  const int n = static_cast<int>(omega.size());
  convex::ExplicitProgram prog(
      n, {[omega](const Vector& p) { return (omega.array() / p.array()).sum(); },
          [omega](const Vector& p) -> Vector { return -(omega.array() / p.array().square()).matrix(); },
          [omega](const Vector& p) -> Matrix {
            return (2.0 * omega.array() / p.array().cube()).matrix().asDiagonal();
          }});
  prog.add_inequality(linear(Vector::Ones(n), -budget));
  for (int k = 0; k < n; ++k) {
    Vector e = Vector::Zero(n);
    e(k) = -1.0;
    prog.add_inequality(linear(e, floor));
  }
  return prog;
}

// min (x - 2)^2 + (y - 1)^2  s.t.  x^2 + y^2 <= 1
convex::ExplicitProgram disk_qp() {
  convex::ExplicitProgram prog(2, quadratic(2.0 * Matrix::Identity(2, 2), Vector{{-4.0, -2.0}}, 5.0));
  prog.add_inequality(quadratic(2.0 * Matrix::Identity(2, 2), Vector::Zero(2), -1.0));
  return prog;
}

convex::Tolerances with_method(convex::Method m) {
  convex::Tolerances tol;
  tol.method = m;
  return tol;
}

const convex::Method kMethods[] = {convex::Method::primal_dual, convex::Method::barrier};

}  // namespace

TEST_SUITE("convex") {
  TEST_CASE("minimum-norm point on the simplex plane") {
    for (const auto method : kMethods) {
      convex::ExplicitProgram prog(3, quadratic(2.0 * Matrix::Identity(3, 3), Vector::Zero(3)));
      prog.set_linear_equalities(Matrix::Ones(1, 3), Vector::Ones(1));
      const auto r = convex::solve(prog, Vector::Zero(3), with_method(method));
      CHECK(r.status == convex::SolveStatus::optimal);
      CHECK((r.x - Vector::Constant(3, 1.0 / 3.0)).lpNorm<Eigen::Infinity>() < 1e-8);
      CHECK(r.eq_residual <= 1e-8);
    }
  }

  TEST_CASE("inverse-sum allocation follows the square root of the weights") {
    for (const auto method : kMethods) {
      const auto prog = inverse_sum(Vector{{4.0, 1.0}}, 3.0, 1e-9);
      const auto r = convex::solve(prog, Vector{{0.5, 0.5}}, with_method(method));
      REQUIRE(r.status == convex::SolveStatus::optimal);
      CHECK(r.x(0) == doctest::Approx(2.0).epsilon(1e-7));
      CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-7));
      CHECK(r.objective == doctest::Approx(3.0).epsilon(1e-7));
      CHECK(r.kkt_residual <= 1e-6);
    }
  }

  TEST_CASE("disk-constrained QP matches a grid search") {
    double grid = std::numeric_limits<double>::infinity();
    for (int i = -1000; i <= 1000; ++i) {
      for (int j = -1000; j <= 1000; ++j) {
        const double x = i * 1e-3, y = j * 1e-3;
        if (x * x + y * y <= 1.0) grid = std::min(grid, (x - 2) * (x - 2) + (y - 1) * (y - 1));
      }
    }
    for (const auto method : kMethods) {
      const auto r = convex::solve(disk_qp(), Vector::Zero(2), with_method(method));
      REQUIRE(r.status == convex::SolveStatus::optimal);
      CHECK(std::abs(r.objective - grid) <= 1e-3);
      CHECK(r.objective == doctest::Approx(std::pow(std::sqrt(5.0) - 1.0, 2)).epsilon(1e-8));
      CHECK(r.inequality_duals(0) > 0.0);
    }
  }

  TEST_CASE("infeasible start goes through phase one") {
    const auto prog = disk_qp();
    const auto r = convex::solve(prog, Vector{{5.0, 5.0}});
    CHECK(r.status == convex::SolveStatus::optimal);
    CHECK(r.phase_one_iterations > 0);
    CHECK(r.max_violation < 0.0);
  }

  TEST_CASE("phase one") {
    const auto prog = disk_qp();
    const Vector hint{{0.1, -0.2}};
    const auto feasible = convex::phase_one(prog, hint);
    CHECK(feasible.feasible);
    CHECK(feasible.x == hint);
    CHECK(feasible.newton_iterations == 0);

    convex::ExplicitProgram clash(1, linear(Vector::Zero(1), 0.0));
    clash.add_inequality(linear(Vector::Ones(1), 0.0));         // x <= 0
    clash.add_inequality(linear(-Vector::Ones(1), 1.0));        // x >= 1
    CHECK_FALSE(convex::phase_one(clash, Vector::Zero(1)).feasible);
    for (const auto method : kMethods) {
      CHECK(convex::solve(clash, Vector::Constant(1, 0.5), with_method(method)).status ==
            convex::SolveStatus::infeasible);
    }
  }

  TEST_CASE("barrier stages decrease the objective") {
    const auto prog = inverse_sum(Vector{{9.0, 4.0, 1.0, 0.25}}, 2.0, 1e-6);
    const auto r = convex::solve(prog, Vector::Constant(4, 0.1), with_method(convex::Method::barrier));
    REQUIRE(r.status == convex::SolveStatus::optimal);
    REQUIRE(r.stage_objectives.size() >= 3);
    CHECK(r.barrier_stages == static_cast<int>(r.stage_objectives.size()));
    for (std::size_t i = 1; i < r.stage_objectives.size(); ++i) {
      CHECK(r.stage_objectives[i] <= r.stage_objectives[i - 1] + 1e-12);
    }
  }

  TEST_CASE("optimum is below every random feasible probe") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      Vector omega(5);
      for (int k = 0; k < 5; ++k) omega(k) = rng.uniform(0.1, 10.0);
      const double budget = rng.uniform(1.0, 5.0);
      const auto prog = inverse_sum(omega, budget, 1e-6);
      for (const auto method : kMethods) {
        const auto r = convex::solve(prog, Vector::Constant(5, budget / 10), with_method(method));
        REQUIRE(r.status == convex::SolveStatus::optimal);
        const double closed = std::pow(omega.array().sqrt().sum(), 2) / budget;
        CHECK(r.objective == doctest::Approx(closed).epsilon(1e-7));
        for (int probe = 0; probe < 100; ++probe) {
          Vector p(5);
          for (int k = 0; k < 5; ++k) p(k) = rng.uniform(1e-3, 1.0);
          p *= budget * rng.uniform(0.5, 1.0) / p.sum();
          CHECK(r.objective <= prog.objective(p) + 1e-8);
        }
      }
    }
  }

  TEST_CASE("solves are deterministic") {
    const auto prog = inverse_sum(Vector{{3.0, 2.0, 1.0}}, 1.0, 1e-9);
    convex::Tolerances tol;
    tol.record_trace = true;
    const auto a = convex::solve(prog, Vector::Constant(3, 0.2), tol);
    const auto b = convex::solve(prog, Vector::Constant(3, 0.2), tol);
    CHECK(a.x == b.x);
    CHECK(a.newton_iterations == b.newton_iterations);
    std::ostringstream ta, tb;
    convex::write_trace_csv(ta, a.trace);
    convex::write_trace_csv(tb, b.trace);
    CHECK(ta.str() == tb.str());
    CHECK(ta.str().rfind("stage,newton_iter,objective,residual\n", 0) == 0);
  }

  TEST_CASE("gradient check on a quadratic") {
    Rng rng(2);
    Matrix q = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) q(i, j) = rng.uniform(-1, 1);
    q = q * q.transpose();
    convex::ExplicitProgram prog(4, quadratic(q, Vector::Ones(4)));
    prog.add_inequality(quadratic(Matrix::Identity(4, 4), Vector::Zero(4), -10.0));
    CHECK(convex::check_gradients(prog, Vector{{0.3, -0.2, 0.5, 0.1}}, 1e-5) <= 1e-9);
  }
}
