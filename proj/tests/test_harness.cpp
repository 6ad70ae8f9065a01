#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavcast/harness.hpp"
#include "uavcast/quality.hpp"

using namespace uavcast;
using namespace uavcast::harness;
namespace fs = std::filesystem;

namespace {

Scenario quick(int slots = 60, int users = 2) {
  Scenario s = reference_scenario(1, users);
  s.slots = slots;
  attach_spectrum(s, pavt::synthetic_gop(1));
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("reference_scenario users are nested and spectrum matches the slots") {
    const Scenario a = reference_scenario(5, 3);
    const Scenario b = reference_scenario(5, 6);
    for (int n = 0; n < 3; ++n) CHECK(a.users[n].position == b.users[n].position);
    CHECK(a.spectrum.kept == 180);
    CHECK(a.spectrum.variances.size() == 192);
    CHECK(validate(a).ok());
  }

  TEST_CASE("baseline spends the communication budget evenly") {
    const Scenario s = quick();
    const Baseline b = baseline(s);
    for (double p : b.power.p) CHECK(p == b.power.p.front());
    CHECK(b.power.p.front() <= s.max_avg_power);
    CHECK(b.mu_db == doctest::Approx(min_psnr(s, b.traj, b.power).value_db));
    Scenario poor = s;
    poor.total_energy = 100.0;
    CHECK_THROWS_AS(baseline(poor), std::invalid_argument);
  }

  TEST_CASE("run writes certified artifacts deterministically") {
    const Scenario s = quick();
    RunOptions o;
    o.out = fresh_dir("uavcast_run_a");
    const RunOutcome first = run(s, o);
    REQUIRE(first.exit_code == kSuccess);
    CHECK(first.result.mu_db >= first.base.mu_db - 1e-9);
    for (const char* f : {"trajectory.csv", "power.csv", "iterations.csv", "psnr.csv", "summary.txt"}) {
      CHECK(fs::exists(o.out / f));
      CHECK_FALSE(fs::exists(o.out / (std::string(f) + ".tmp")));
    }
    CHECK(slurp(o.out / "psnr.csv").rfind("user,mode,empirical_psnr_db,analytic_psnr_db,trials\n1,analytic,,", 0) == 0);
    const std::string summary = slurp(o.out / "summary.txt");
    CHECK(summary.find("<- minimum") != std::string::npos);
    CHECK(summary.find("certification: ok") != std::string::npos);

    RunOptions o2 = o;
    o2.out = fresh_dir("uavcast_run_b");
    run(s, o2);
    for (const char* f : {"trajectory.csv", "power.csv", "iterations.csv", "psnr.csv", "summary.txt"}) {
      CHECK(slurp(o.out / f) == slurp(o2.out / f));
    }
    fs::remove_all(o.out);
    fs::remove_all(o2.out);
  }

  TEST_CASE("Monte-Carlo run reports every user") {
    const Scenario s = quick(60, 2);
    RunOptions o;
    o.montecarlo = true;
    o.trials = 3;
    o.modes = {pavt::DecodeMode::zero_forcing, pavt::DecodeMode::llse};
    const RunOutcome r = run(s, o);
    REQUIRE(r.exit_code == kSuccess);
    CHECK(r.simulated.size() == 4);
    CHECK(summary_text(s, r).find("simulated_db") != std::string::npos);
  }

  TEST_CASE("infeasible energy budget exits with the infeasible code") {
    Scenario s = quick();
    s.total_energy = 100.0;
    RunOptions o;
    o.out = fresh_dir("uavcast_run_infeasible");
    const RunOutcome r = run(s, o);
    CHECK(r.exit_code == kInfeasible);
    CHECK_FALSE(r.diagnostic.empty());
    CHECK_FALSE(fs::exists(o.out / "summary.txt"));
  }

  TEST_CASE("sweep parameters") {
    CHECK(parse_sweep_param("K") == SweepParam::slots);
    CHECK(parse_sweep_param("E_t") == SweepParam::total_energy);
    CHECK(parse_sweep_param("N") == SweepParam::users);
    CHECK_THROWS_AS(parse_sweep_param("Q"), std::invalid_argument);
    CHECK(to_string(SweepParam::total_energy) == "E_t");
  }

  TEST_CASE("sweep continues past a failing member") {
    const Scenario s = quick();
    RunOptions o;
    o.out = fresh_dir("uavcast_sweep");
    const auto rows = sweep(s, SweepParam::slots, {0.0, 60.0, 2.5}, 1, o);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].status.rfind("error: ", 0) == 0);
    CHECK(rows[1].exit_code == kSuccess);
    CHECK(rows[1].psnr_db.size() == 2);
    CHECK(rows[2].status.rfind("error: ", 0) == 0);
    CHECK(fs::exists(o.out / "K_60" / "summary.txt"));

    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    std::istringstream lines(csv.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      if (count > 0) CHECK(std::count(line.begin(), line.end(), ',') == 8);
      ++count;
    }
    CHECK(count == 4);
    fs::remove_all(o.out);
  }

  TEST_CASE("user sweep regenerates nested users") {
    const Scenario s = quick();
    const auto rows = sweep(s, SweepParam::users, {1.0, 3.0}, 1, RunOptions{});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].psnr_db.size() == 1);
    CHECK(rows[1].psnr_db.size() == 3);
    CHECK(rows[1].mu_db <= rows[0].mu_db + 0.05);
  }
}
