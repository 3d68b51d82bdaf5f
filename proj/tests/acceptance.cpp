// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "habs/calib.hpp"
#include "habs/control.hpp"
#include "habs/io.hpp"
#include "habs/plant.hpp"
#include "habs/sim.hpp"
#include "habs/sysid.hpp"
#include "oracles.hpp"

namespace {

// Tolerances.
constexpr double kCalibMaxAbs = 1.0;     // degC per point
constexpr double kCalibMaxRms = 0.8;     // degC
constexpr double kGainRel = 0.01;
constexpr double kTauRel = 0.02;
constexpr double kRiseMax = 4.0;         // s
constexpr double kOvershootMax = 10.0;   // percent
constexpr double kSettleBand = 0.02;
constexpr double kExactRel = 1e-10;
constexpr double kRoundTrip = 1e-9;
constexpr double kWindupMargin = 2.0;    // percentage points the windup run must exceed

const std::string kData = HABS_DATA_DIR;

habs::Scenario load(const std::string& name) {
  return habs::io::scenario_from_json(habs::io::read_json_file(kData + "/scenarios/" + name));
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (detail.size() < 600) detail += (detail.empty() ? "" : "; ") + what;
  }
};

Verdict calibration_fidelity() {
  Verdict v;
  const std::vector<habs::CalibrationPoint> table{{23, -3.5299}, {30, -2.5177}, {40, 1.2735},
                                                  {50, 4.5324},  {60, 6.7338},  {70, 7.5873}};
  const auto rig = habs::CalibrationPoly::pt326();
  for (const auto& p : table) {
    const double err = habs::eval_poly(rig, p.voltage) - p.temperature;
    v.expect(std::abs(err) <= kCalibMaxAbs, fmt::format("rig poly misses T={} by {:+.3f} C", p.temperature, err));
  }
  const auto fit = habs::fit_cubic(table);
  for (const auto& p : table) {
    const double err = habs::eval_poly(fit, p.voltage) - p.temperature;
    v.expect(std::abs(err) <= kCalibMaxAbs, fmt::format("fit misses T={} by {:+.3f} C", p.temperature, err));
  }
  const double rms = habs::rms_residual(fit, table);
  v.expect(rms < kCalibMaxRms, fmt::format("fit rms {:.4f} C", rms));
  return v;
}

Verdict identification_round_trip() {
  Verdict v;
  const auto plant = habs::PlantConfig::canonical();
  std::vector<habs::StepRecord> recs;
  for (double u0 : {0.0, 1.0, 2.0}) recs.push_back(habs::run_open_loop_step(u0, u0 + 1.0, 60.0, 0.1, plant));
  const auto model = habs::identify_regions(recs);
  v.expect(model.regions.size() == 3, "expected three regions");
  for (std::size_t i = 0; i < std::min<std::size_t>(3, model.regions.size()); ++i) {
    const auto& m = model.regions[i].model;
    const double k = plant.region_gains[i], tau = plant.region_taus[i];
    v.expect(std::abs(m.gain - k) <= kGainRel * k, fmt::format("region {} gain {:.4f}", i + 1, m.gain));
    v.expect(std::abs(m.tau - tau) <= kTauRel * tau, fmt::format("region {} tau {:.4f}", i + 1, m.tau));
  }
  return v;
}

Verdict regional_objectives() {
  Verdict v;
  const char* files[] = {"region_i_step.json", "region_ii_step.json", "region_iii_step.json"};
  for (std::size_t r = 0; r < 3; ++r) {
    const auto log = habs::run_closed_loop(load(files[r]));
    for (const auto& row : log.rows) {
      if (row.region != r) {
        v.expect(false, fmt::format("{} leaves region {} at t={}", files[r], habs::region_label(r), row.t));
        break;
      }
    }
    if (log.steps.size() != 1 || !log.steps[0].metrics) {
      v.expect(false, fmt::format("{}: no measurable step", files[r]));
      continue;
    }
    const auto& m = *log.steps[0].metrics;
    v.expect(m.rise_time < kRiseMax, fmt::format("{} rise {:.3f} s", files[r], m.rise_time));
    v.expect(m.overshoot < kOvershootMax, fmt::format("{} overshoot {:.2f}%", files[r], m.overshoot));
  }
  return v;
}

Verdict cross_region_tracking() {
  Verdict v;
  const auto scn = load("ladder.json");
  const auto log = habs::run_closed_loop(scn);
  std::set<std::size_t> seen;
  for (const auto& row : log.rows) seen.insert(row.region);
  v.expect(seen == std::set<std::size_t>{0, 1, 2}, "ladder does not visit I, II and III");

  v.expect(log.steps.size() == 3, "expected three setpoint steps");
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& st = log.steps[i];
    const std::size_t end = i + 1 < log.steps.size() ? log.steps[i + 1].start_index : log.rows.size();
    const double band = kSettleBand * std::abs(st.setpoint - st.from_temp);
    const auto& last = log.rows[end - 1];
    v.expect(std::abs(last.temp_internal - st.setpoint) <= band,
             fmt::format("level {} ends at {:.3f}", st.setpoint, last.temp_internal));
    v.expect(st.metrics && std::isfinite(st.metrics->settling_time),
             fmt::format("level {} never settles", st.setpoint));
  }

  double kp_lo = std::numeric_limits<double>::infinity(), kp_hi = -kp_lo, ki_max = 0.0;
  for (const auto& r : scn.controller.regions) {
    kp_lo = std::min(kp_lo, r.gains.kp);
    kp_hi = std::max(kp_hi, r.gains.kp);
    ki_max = std::max(ki_max, r.gains.ki);
  }
  std::size_t switches = 0;
  for (std::size_t k = 1; k < log.rows.size(); ++k) {
    if (log.rows[k].region == log.rows[k - 1].region) continue;
    ++switches;
    const double e = std::abs(log.rows[k].error);
    const double jump = std::abs(log.rows[k].u_daq - log.rows[k - 1].u_daq);
    const double bound = (kp_hi - kp_lo) * e + ki_max * scn.ts * e;
    v.expect(jump <= bound + 1e-12, fmt::format("switch at t={} jumps {:.4g} > {:.4g}", log.rows[k].t, jump, bound));
  }
  v.expect(switches > 0, "no region switch in the log");
  return v;
}

Verdict anti_windup() {
  Verdict v;
  auto scn = load("cold_start.json");
  scn.controller.anti_windup = true;
  const auto log = habs::run_closed_loop(scn);
  bool hit_top = false;
  double entry = 0.0;
  bool in_sat = false;
  for (const auto& row : log.rows) {
    if (row.saturated && row.u_daq >= scn.controller.sat_high) hit_top = true;
    if (row.saturated && !in_sat) entry = row.integrator;
    in_sat = row.saturated;
    if (in_sat) {
      v.expect(row.integrator <= entry + 1e-12,
               fmt::format("integrator {:.6f} above entry {:.6f} at t={}", row.integrator, entry, row.t));
    }
  }
  v.expect(hit_top, "u never saturates at the upper limit");
  const auto overshoot = [](const habs::SimLog& l) {
    return l.steps.size() == 1 && l.steps[0].metrics ? l.steps[0].metrics->overshoot
                                                     : std::numeric_limits<double>::quiet_NaN();
  };
  const double with_aw = overshoot(log);
  v.expect(with_aw < kOvershootMax, fmt::format("overshoot {:.2f}% with anti-windup", with_aw));

  scn.controller.anti_windup = false;
  const double without = overshoot(habs::run_closed_loop(scn));
  v.expect(without > with_aw + kWindupMargin,
           fmt::format("windup run overshoot {:.2f}% not above {:.2f}%", without, with_aw));
  if (v.pass) v.detail = fmt::format("overshoot {:.2f}% vs {:.2f}% without anti-windup", with_aw, without);
  return v;
}

Verdict determinism() {
  Verdict v;
  for (const char* name : {"ladder.json", "live.json", "cold_start.json", "region_ii_step.json"}) {
    auto scn = load(name);
    if (scn.plant.noise_sigma == 0.0) scn.plant.noise_sigma = 0.05;
    const auto a = habs::io::sim_log_csv(habs::run_closed_loop(scn));
    const auto b = habs::io::sim_log_csv(habs::run_closed_loop(scn));
    v.expect(a == b, fmt::format("{} logs differ", name));
  }
  const auto cfg = habs::PlantConfig::canonical();
  struct Case { double u, t0, tau; };
  for (const auto& c : {Case{0.5, 29.6, 6.5}, Case{1.5, 39.1, 15.0}, Case{3.5, 47.1, 16.0}}) {
    auto s = habs::make_plant_state(cfg, c.t0);
    const double target = habs::steady_state_temp(c.u, cfg);
    for (int k = 1; k <= 600; ++k) {
      habs::plant_tick(s, c.u, 0.1, cfg);
      const double expected = oracle::first_order(c.t0, target, c.tau, k * 0.1);
      if (std::abs(s.temp - expected) > kExactRel * std::abs(expected)) {
        v.expect(false, fmt::format("u={} sample {} off by {:.3g}", c.u, k, s.temp - expected));
        break;
      }
    }
  }
  return v;
}

Verdict property_suites() {
  Verdict v;
  // Calibration: strict monotonicity and voltage round trip.
  const auto rig = habs::CalibrationPoly::pt326();
  v.expect(habs::is_strictly_increasing(rig), "rig poly not certified increasing");
  for (int i = 0; i <= 13000; ++i) {
    const double volts = -4.0 + i * 1e-3;
    const double back = habs::invert_poly(rig, habs::eval_poly(rig, volts));
    if (std::abs(back - volts) > kRoundTrip) {
      v.expect(false, fmt::format("round trip at {} V off by {:.3g}", volts, back - volts));
      break;
    }
  }
  // Identification over a grid with the standard 60 s protocol.
  for (double k : {4.0, 9.5, 15.0}) {
    for (double tau : {2.0, 6.5, 15.0, 16.0, 20.0}) {
      auto plant = habs::PlantConfig::canonical();
      plant.region_gains = {k, k, k};
      plant.region_taus = {tau, tau, tau};
      const auto m = habs::estimate_first_order(habs::run_open_loop_step(0.0, 1.0, 60.0, 0.1, plant));
      v.expect(std::abs(m.gain - k) <= kGainRel * k && std::abs(m.tau - tau) <= kTauRel * tau,
               fmt::format("grid K={} tau={} -> ({:.4f}, {:.4f})", k, tau, m.gain, m.tau));
    }
  }
  // Region boundaries.
  const auto regions = habs::ControllerConfig::standard().regions;
  const auto plant = habs::PlantConfig::canonical();
  const double eps = 1e-12;
  const std::pair<double, std::size_t> cases[] = {{1.0 - eps, 0}, {1.0, 1}, {2.0 - eps, 1}, {2.0, 2}};
  for (const auto& [u, want] : cases) {
    v.expect(habs::select_region(u, regions) == want, fmt::format("controller region at u={:.17g}", u));
    v.expect(habs::plant_region(u, plant) == want, fmt::format("plant region at u={:.17g}", u));
  }
  // First-order metric closed forms.
  for (double tau : {1.0, 6.5, 16.0}) {
    std::vector<double> t, y;
    const double dt = tau * 1e-4;
    for (int i = 0; i <= 100000; ++i) {
      t.push_back(i * dt);
      y.push_back(oracle::first_order(0.0, 1.0, tau, i * dt));
    }
    const auto m = habs::compute_metrics(t, y, 1.0);
    v.expect(std::abs(m.rise_time - 2.197 * tau) <= 1e-3 * tau, fmt::format("tau={} rise {:.5f}", tau, m.rise_time));
    v.expect(m.overshoot == 0.0, fmt::format("tau={} overshoot {}", tau, m.overshoot));
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"calibration fidelity", calibration_fidelity},
      {"identification round trip", identification_round_trip},
      {"closed-loop objectives per region", regional_objectives},
      {"cross-region tracking", cross_region_tracking},
      {"anti-windup", anti_windup},
      {"determinism and exact plant", determinism},
      {"property suites", property_suites},
  };
  const auto started = std::chrono::steady_clock::now();
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = fmt::format("exception: {}", e.what());
    }
    failed += v.pass ? 0 : 1;
    std::cout << fmt::format("{} {}. {}{}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                             v.detail.empty() ? "" : " (" + v.detail + ")");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::cout << fmt::format("{} of {} criteria passed in {:.1f} s\n", criteria.size() - failed, criteria.size(), secs);
  return failed == 0 ? 0 : 1;
}
