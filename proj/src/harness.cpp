#include "uavcast/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "uavcast/csv.hpp"
#include "uavcast/power.hpp"
#include "uavcast/quality.hpp"
#include "uavcast/rng.hpp"

namespace uavcast::harness {

namespace {

constexpr std::pair<double, double> kPlacement{0.0, 1200.0};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string value_label(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return CsvWriter::format(v);
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

void write_psnr_table(std::ostream& os, const Scenario& s, const RunOutcome& o) {
  if (!o.simulated.empty()) {
    pavt::write_psnr_csv(os, o.simulated);
    return;
  }
  CsvWriter csv(os);
  csv.row("user", "mode", "empirical_psnr_db", "analytic_psnr_db", "trials");
  for (std::size_t n = 0; n < s.users.size(); ++n) csv.row(s.users[n].id, "analytic", "", o.psnr_db[n], 0);
}

}  // namespace

void attach_spectrum(Scenario& s, const pavt::Gop& gop) {
  s.spectrum = pavt::spectrum_of(pavt::blockize_and_sort(pavt::dct3_forward(gop)), s.slots);
  refresh_derived(s);
}

Scenario reference_scenario(std::uint64_t seed, int users) {
  Scenario s = default_scenario();
  s.seed = seed;
  s.users = generate_users(seed, users, kPlacement, kPlacement);
  attach_spectrum(s, pavt::synthetic_gop(seed));
  return s;
}

Baseline baseline(const Scenario& s) {
  require_valid(s);
  Baseline b;
  auto init = initial_solution(s);
  b.traj = std::move(init.first);
  const double budget = comm_budget(s, b.traj);
  const double p = budget / (s.coeffs_per_block * s.slot_len * s.slots);
  if (!(p >= s.p_floor)) {
    throw std::invalid_argument("straight-line flight leaves " + CsvWriter::format(budget) +
                                " J for communication, below the power floor");
  }
  b.power.p.assign(s.slots, s.per_slot_cap ? std::min(p, s.max_avg_power) : p);
  b.psnr_db = all_psnr(s, b.traj, b.power);
  b.mu_db = min_psnr(s, b.traj, b.power).value_db;
  return b;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp.string() + ": cannot open for writing");
    out << content;
    if (!out) throw std::runtime_error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

RunOutcome run(const Scenario& s, const RunOptions& options) {
  RunOutcome o;
  try {
    o.base = baseline(s);
  } catch (const std::invalid_argument& e) {
    o.exit_code = kInfeasible;
    o.diagnostic = e.what();
    return o;
  }

  o.result = optimize(s, options.bcd);
  if (o.result.status == BcdStatus::infeasible) {
    o.exit_code = kInfeasible;
    o.diagnostic = o.result.message;
    return o;
  }
  if (!o.result.certification.ok()) {
    o.exit_code = kError;
    o.diagnostic = o.result.message;
    return o;
  }
  o.psnr_db = all_psnr(s, o.result.traj, o.result.power);

  if (options.montecarlo) {
    const pavt::Gop gop = options.gop ? *options.gop : pavt::synthetic_gop(s.seed);
    for (std::size_t n = 0; n < s.users.size(); ++n) {
      for (const auto mode : options.modes) {
        o.simulated.push_back(pavt::monte_carlo(gop, s, o.result.traj, o.result.power, static_cast<int>(n), mode,
                                                options.trials, derive_seed(s.seed, "montecarlo")));
      }
    }
  }
  o.exit_code = o.result.status == BcdStatus::converged ? kSuccess : kNotConverged;

  if (!options.out.empty()) {
    std::filesystem::create_directories(options.out);
    write_atomically(options.out / "trajectory.csv",
                     render([&](std::ostream& os) { write_trajectory_csv(os, o.result.traj, o.result.power); }));
    write_atomically(options.out / "power.csv",
                     render([&](std::ostream& os) { write_power_csv(os, s, o.result.power); }));
    write_atomically(options.out / "iterations.csv",
                     render([&](std::ostream& os) { write_iterations_csv(os, o.result.trace); }));
    write_atomically(options.out / "psnr.csv", render([&](std::ostream& os) { write_psnr_table(os, s, o); }));
    write_atomically(options.out / "summary.txt", summary_text(s, o));
  }
  return o;
}

std::string summary_text(const Scenario& s, const RunOutcome& o) {
  std::ostringstream os;
  const BcdResult& r = o.result;
  os << "status: " << to_string(r.status) << " after " << (r.trace.empty() ? 0 : r.trace.size() - 1)
     << " outer iterations (" << r.newton_iterations << " Newton steps)\n";
  os << "certification: " << (r.certification.ok() ? "ok" : "FAILED") << '\n';
  for (const auto& f : r.certification.failures) os << "  " << f << '\n';
  const EnergyReport e = energy_feasible(s, r.traj, r.power);
  os << "energy: E_c " << fixed(e.comm, 3) << " J, E_f " << fixed(e.flight, 3) << " J, slack " << fixed(e.slack, 6)
     << " J of " << fixed(s.total_energy, 1) << " J\n";
  os << "max dynamics residual: " << r.certification.dynamics_residual << '\n';
  os << "speed range: " << fixed(r.certification.min_speed, 3) << " .. " << fixed(r.certification.max_speed, 3)
     << " m/s, max acceleration " << fixed(r.certification.max_accel, 3) << " m/s^2\n";
  os << "baseline min-PSNR: " << fixed(o.base.mu_db, 4) << " dB\n";
  os << "optimized min-PSNR: " << fixed(r.mu_db, 4) << " dB (" << (r.mu_db >= o.base.mu_db ? "+" : "")
     << fixed(r.mu_db - o.base.mu_db, 4) << " dB)\n\n";

  os << std::left << std::setw(6) << "user" << std::right << std::setw(10) << "x_m" << std::setw(10) << "y_m"
     << std::setw(14) << "baseline_db" << std::setw(14) << "psnr_db";
  if (!o.simulated.empty()) os << std::setw(16) << "simulated_db";
  os << '\n';
  for (std::size_t n = 0; n < s.users.size(); ++n) {
    const auto& u = s.users[n];
    os << std::left << std::setw(6) << u.id << std::right << std::setw(10) << fixed(u.position.x(), 1)
       << std::setw(10) << fixed(u.position.y(), 1) << std::setw(14) << fixed(o.base.psnr_db.at(n), 4)
       << std::setw(14) << fixed(o.psnr_db.at(n), 4);
    if (!o.simulated.empty()) {
      const auto it = std::find_if(o.simulated.begin(), o.simulated.end(),
                                   [n](const pavt::MonteCarloResult& m) { return m.user == static_cast<int>(n); });
      os << std::setw(16) << (it == o.simulated.end() ? std::string("-") : fixed(it->empirical_psnr_db, 4));
    }
    if (static_cast<int>(n) == r.user) os << "  <- minimum";
    os << '\n';
  }
  return os.str();
}

SweepParam parse_sweep_param(const std::string& text) {
  if (text == "K" || text == "slots") return SweepParam::slots;
  if (text == "E_t" || text == "Et" || text == "total_energy") return SweepParam::total_energy;
  if (text == "N" || text == "users") return SweepParam::users;
  throw std::invalid_argument("unknown sweep parameter '" + text + "' (expected K, E_t or N)");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::slots:
      return "K";
    case SweepParam::total_energy:
      return "E_t";
    case SweepParam::users:
      return "N";
  }
  return "unknown";
}

std::vector<SweepRow> sweep(const Scenario& base, SweepParam param, const std::vector<double>& values,
                            std::uint64_t seed, const RunOptions& options) {
  std::vector<SweepRow> rows;
  for (const double value : values) {
    SweepRow row;
    row.param = param;
    row.value = value;
    try {
      Scenario s = base;
      switch (param) {
        case SweepParam::slots:
          if (value != std::floor(value) || value < 1) throw std::invalid_argument("K must be a positive integer");
          s.slots = static_cast<int>(value);
          refresh_derived(s);
          break;
        case SweepParam::total_energy:
          s.total_energy = value;
          break;
        case SweepParam::users:
          if (value != std::floor(value) || value < 1) throw std::invalid_argument("N must be a positive integer");
          s.users = generate_users(seed, static_cast<int>(value), kPlacement, kPlacement);
          break;
      }
      RunOptions member = options;
      if (!options.out.empty()) member.out = options.out / (to_string(param) + "_" + value_label(value));
      const RunOutcome o = run(s, member);
      row.exit_code = o.exit_code;
      row.baseline_db = o.base.mu_db;
      if (o.exit_code == kSuccess || o.exit_code == kNotConverged) {
        row.status = to_string(o.result.status);
        row.mu_db = o.result.mu_db;
        row.outer_iterations = static_cast<int>(o.result.trace.size()) - 1;
        row.newton_iterations = o.result.newton_iterations;
        row.slack_gap = o.result.final_slack_gap;
        row.psnr_db = o.psnr_db;
      } else {
        row.status = "error: " + o.diagnostic;
      }
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  CsvWriter csv(os);
  csv.row("param", "value", "status", "min_psnr_db", "baseline_db", "outer_iterations", "newton_iterations",
          "slack_gap", "user_psnr_db");
  for (const auto& r : rows) {
    std::string users;
    for (std::size_t n = 0; n < r.psnr_db.size(); ++n) users += (n ? ";" : "") + CsvWriter::format(r.psnr_db[n]);
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    csv.row(to_string(r.param), value_label(r.value), status, r.mu_db, r.baseline_db, r.outer_iterations,
            r.newton_iterations, r.slack_gap, users);
  }
}

}  // namespace uavcast::harness
