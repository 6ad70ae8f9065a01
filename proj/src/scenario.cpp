#include "uavcast/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "uavcast/rng.hpp"

namespace uavcast {

using nlohmann::json;

std::string ValidationResult::message() const {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

void refresh_derived(Scenario& scenario) {
  if (scenario.v0_auto && scenario.slots >= 1 && scenario.slot_len > 0.0) {
    scenario.v0 = scenario.cruise_velocity();
  }
  scenario.spectrum.kept = scenario.slots;
}

ValidationResult validate(const Scenario& s) {
  ValidationResult r;
  auto fail = [&r](std::string msg) { r.errors.push_back(std::move(msg)); };

  if (s.slots < 1) fail("slots must be >= 1");
  if (!(s.slot_len > 0.0)) fail("slot_len_s must be > 0");
  if (!(s.altitude > 0.0)) fail("altitude_m must be > 0");
  if (s.start.z() != s.altitude) fail("start_m z-component must equal altitude_m");
  if (s.end.z() != s.altitude) fail("end_m z-component must equal altitude_m");
  if (!(s.total_energy > 0.0)) fail("total_energy_j must be > 0");
  if (!(s.max_avg_power > 0.0)) fail("max_avg_power must be > 0");
  if (!(s.pixel_peak > 0.0)) fail("pixel_peak must be > 0");
  if (s.coeffs_per_block < 1) fail("coeffs_per_block must be >= 1");
  if (!(s.p_floor > 0.0) || s.p_floor >= s.max_avg_power) fail("p_floor_w must lie in (0, max_avg_power)");

  const auto& lim = s.limits;
  if (!(lim.v_min > 0.0 && lim.v_min < lim.v_max)) fail("velocity limits must satisfy 0 < v_min < v_max");
  if (!(lim.a_max > 0.0)) fail("a_max_mps2 must be > 0");

  const auto& prop = s.propulsion;
  if (!(prop.c1 > 0.0 && prop.c2 > 0.0 && prop.g0 > 0.0)) fail("propulsion constants c1, c2, g0 must be > 0");

  const auto& ch = s.channel;
  if (!(ch.beta0 > 0.0)) fail("beta0 must be > 0");
  if (!(ch.alpha >= 2.0 && ch.alpha <= 6.0)) fail("path_loss_exponent must lie in [2, 6]");
  if (!(ch.noise_power > 0.0)) fail("noise power must be > 0");

  const auto& lambda = s.spectrum.variances;
  if (lambda.empty()) fail("block_variances must not be empty");
  for (std::size_t m = 0; m < lambda.size(); ++m) {
    if (!(lambda[m] >= 0.0)) {
      fail("block_variances[" + std::to_string(m) + "] must be >= 0");
      break;
    }
    if (m > 0 && lambda[m] > lambda[m - 1]) {
      fail("block_variances must be nonincreasing (violated at index " + std::to_string(m) + ")");
      break;
    }
  }
  if (s.spectrum.kept < 0 || s.spectrum.kept > static_cast<int>(lambda.size())) {
    fail("kept block count must not exceed the number of blocks");
  }
  if (s.spectrum.kept != s.slots) fail("kept block count must equal slots");

  if (s.users.empty()) fail("at least one ground user is required");
  for (std::size_t i = 0; i < s.users.size(); ++i) {
    if (s.users[i].position.z() != 0.0) fail("user " + std::to_string(s.users[i].id) + " must have z = 0");
    for (std::size_t j = 0; j < i; ++j) {
      if (s.users[j].id == s.users[i].id) fail("duplicate user id " + std::to_string(s.users[i].id));
    }
  }

  if (s.slots >= 1 && s.slot_len > 0.0) {
    r.cruise_speed = s.cruise_velocity().norm();
    if (lim.v_min < lim.v_max && (r.cruise_speed < lim.v_min || r.cruise_speed > lim.v_max)) {
      std::ostringstream os;
      os << "straight-line cruise speed " << r.cruise_speed << " m/s outside [" << lim.v_min << ", "
         << lim.v_max << "]";
      fail(os.str());
    }
  }
  return r;
}

void require_valid(const Scenario& scenario) {
  const auto r = validate(scenario);
  if (!r.ok()) throw std::invalid_argument("invalid scenario: " + r.message());
}

std::vector<GroundUser> generate_users(std::uint64_t seed, int n, std::pair<double, double> x_range,
                                       std::pair<double, double> y_range) {
  if (n < 1) throw std::invalid_argument("generate_users: n must be >= 1");
  if (!(x_range.second > x_range.first) || !(y_range.second > y_range.first)) {
    throw std::invalid_argument("generate_users: empty placement range");
  }
  Rng rng(derive_seed(seed, "users"));
  std::vector<GroundUser> users;
  users.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(x_range.first, x_range.second);
    const double y = rng.uniform(y_range.first, y_range.second);
    users.push_back({i + 1, Vec3(x, y, 0.0)});
  }
  return users;
}

std::pair<Trajectory, PowerAllocation> initial_solution(const Scenario& s) {
  const int K = s.slots;
  const Vec3 step = (s.end - s.start) / K;
  const Vec3 cruise = s.cruise_velocity();
  Trajectory traj;
  traj.q.resize(K + 1);
  traj.v.assign(K + 1, cruise);
  traj.a.assign(K + 1, Vec3::Zero());
  for (int k = 0; k <= K; ++k) traj.q[k] = s.start + static_cast<double>(k) * step;
  traj.q[K] = s.end;
  traj.v[0] = s.v0;
  traj.a[0] = s.a0;
  PowerAllocation power{std::vector<double>(K, s.max_avg_power)};
  return {std::move(traj), std::move(power)};
}

EnergyReport energy_feasible(const Scenario& s, const Trajectory& traj, const PowerAllocation& power) {
  EnergyReport r;
  r.comm = comm_energy(s.coeffs_per_block, s.slot_len, power);
  r.flight = flight_energy(s.propulsion, traj, s.slot_len);
  r.slack = s.total_energy - r.comm - r.flight;
  r.within_total = r.slack >= 0.0;
  // Relative slack on the cap absorbs the rounding of K * N_p * dt * P.
  r.within_comm_cap = r.comm >= 0.0 && r.comm <= s.max_comm_energy() * (1.0 + 1e-12);
  return r;
}

Scenario default_scenario() {
  Scenario s;
  s.channel.beta0 = db_to_linear(-40.0);
  s.channel.alpha = 2.0;
  s.channel.noise_power = dbm_to_watts(-109.0);
  s.max_avg_power = dbm_to_watts(10.0);
  refresh_derived(s);
  return s;
}

// ---------------------------------------------------------------------------
// File format

namespace {

constexpr const char* kEnvPrefix = "UAVCAST_";

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "altitude_m",      "start_m",          "end_m",         "slots",
      "slot_len_s",      "v_min_mps",        "v_max_mps",     "a_max_mps2",
      "c1",              "c2",               "g0_mps2",       "beta0_db",
      "path_loss_exponent", "noise_power_dbm", "total_energy_j", "max_avg_power_dbm",
      "coeffs_per_block", "pixel_peak",      "v0_mps",        "a0_mps2",
      "per_slot_power_cap", "p_floor_w",     "seed",          "users_m",
      "block_variances"};
  return keys;
}

std::string env_name(const std::string& key) {
  std::string name = kEnvPrefix;
  for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

Vec3 to_vec3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(key + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json from_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::string scenario_to_text(const Scenario& s) {
  json j;
  j["altitude_m"] = s.altitude;
  j["start_m"] = from_vec3(s.start);
  j["end_m"] = from_vec3(s.end);
  j["slots"] = s.slots;
  j["slot_len_s"] = s.slot_len;
  j["v_min_mps"] = s.limits.v_min;
  j["v_max_mps"] = s.limits.v_max;
  j["a_max_mps2"] = s.limits.a_max;
  j["c1"] = s.propulsion.c1;
  j["c2"] = s.propulsion.c2;
  j["g0_mps2"] = s.propulsion.g0;
  j["beta0_db"] = linear_to_db(s.channel.beta0);
  j["path_loss_exponent"] = s.channel.alpha;
  j["noise_power_dbm"] = watts_to_dbm(s.channel.noise_power);
  j["total_energy_j"] = s.total_energy;
  j["max_avg_power_dbm"] = watts_to_dbm(s.max_avg_power);
  j["coeffs_per_block"] = s.coeffs_per_block;
  j["pixel_peak"] = s.pixel_peak;
  j["v0_mps"] = s.v0_auto ? json(nullptr) : from_vec3(s.v0);
  j["a0_mps2"] = from_vec3(s.a0);
  j["per_slot_power_cap"] = s.per_slot_cap;
  j["p_floor_w"] = s.p_floor;
  j["seed"] = s.seed;
  json users = json::array();
  for (const auto& u : s.users) users.push_back(json::array({u.position.x(), u.position.y()}));
  j["users_m"] = users;
  j["block_variances"] = s.spectrum.variances;
  return j.dump(2) + "\n";
}

Scenario scenario_from_text(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ": parse error at " + locate(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(source + ": top level must be an object");

  for (const auto& key : known_keys()) {
    if (const char* value = std::getenv(env_name(key).c_str())) {
      try {
        j[key] = json::parse(value);
      } catch (const json::parse_error&) {
        j[key] = std::string(value);
      }
    }
  }
  for (const auto& [key, _] : j.items()) {
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
      throw std::runtime_error(source + ": unknown key '" + key + "'");
    }
  }

  Scenario s = default_scenario();
  std::string current;
  try {
    auto get = [&](const char* key, auto& out) {
      current = key;
      if (j.contains(key)) out = j.at(key).get<std::remove_reference_t<decltype(out)>>();
    };
    get("altitude_m", s.altitude);
    current = "start_m";
    if (j.contains("start_m")) s.start = to_vec3(j["start_m"], current);
    current = "end_m";
    if (j.contains("end_m")) s.end = to_vec3(j["end_m"], current);
    get("slots", s.slots);
    get("slot_len_s", s.slot_len);
    get("v_min_mps", s.limits.v_min);
    get("v_max_mps", s.limits.v_max);
    get("a_max_mps2", s.limits.a_max);
    get("c1", s.propulsion.c1);
    get("c2", s.propulsion.c2);
    get("g0_mps2", s.propulsion.g0);
    current = "beta0_db";
    if (j.contains(current)) s.channel.beta0 = db_to_linear(j[current].get<double>());
    get("path_loss_exponent", s.channel.alpha);
    current = "noise_power_dbm";
    if (j.contains(current)) s.channel.noise_power = dbm_to_watts(j[current].get<double>());
    get("total_energy_j", s.total_energy);
    current = "max_avg_power_dbm";
    if (j.contains(current)) s.max_avg_power = dbm_to_watts(j[current].get<double>());
    get("coeffs_per_block", s.coeffs_per_block);
    get("pixel_peak", s.pixel_peak);
    current = "v0_mps";
    if (j.contains(current) && !j[current].is_null()) {
      s.v0 = to_vec3(j[current], current);
      s.v0_auto = false;
    }
    current = "a0_mps2";
    if (j.contains(current)) s.a0 = to_vec3(j[current], current);
    get("per_slot_power_cap", s.per_slot_cap);
    get("p_floor_w", s.p_floor);
    get("seed", s.seed);
    current = "users_m";
    if (j.contains(current)) {
      int id = 1;
      for (const auto& u : j[current]) {
        if (!u.is_array() || u.size() != 2) throw std::invalid_argument("users_m: expected [x, y] pairs");
        s.users.push_back({id++, Vec3(u[0].get<double>(), u[1].get<double>(), 0.0)});
      }
    }
    get("block_variances", s.spectrum.variances);
  } catch (const json::exception& e) {
    throw std::runtime_error(source + ": key '" + current + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
  refresh_derived(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_text(buf.str(), path.string());
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write scenario file");
  out << scenario_to_text(scenario);
}

}  // namespace uavcast
