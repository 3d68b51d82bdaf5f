#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "habs/error.hpp"
#include "habs/plant.hpp"
#include "oracles.hpp"

using habs::PlantConfig;

namespace {

habs::Errc error_code(auto&& fn) {
  try {
    fn();
  } catch (const habs::Error& e) {
    return e.code();
  }
  FAIL("expected habs::Error");
  return habs::Errc::IoError;
}

}  // namespace

TEST_CASE("static map anchors") {
  const auto cfg = PlantConfig::canonical();
  CHECK(habs::steady_state_temp(0.0, cfg) == doctest::Approx(29.6));
  CHECK(habs::steady_state_temp(1.0, cfg) == doctest::Approx(39.1));
  CHECK(habs::steady_state_temp(3.0, cfg) == doctest::Approx(57.1));
  CHECK(habs::steady_state_temp(4.0, cfg) == doctest::Approx(67.1));
  CHECK(error_code([&] { habs::steady_state_temp(4.01, cfg); }) == habs::Errc::InputOutOfRange);
  CHECK(error_code([&] { habs::steady_state_temp(-0.01, cfg); }) == habs::Errc::InputOutOfRange);
}

TEST_CASE("empirical preset follows the measured step endpoints") {
  const auto cfg = PlantConfig::empirical();
  CHECK(habs::steady_state_temp(1.0, cfg) == doctest::Approx(39.5));
  CHECK(habs::steady_state_temp(2.0, cfg) == doctest::Approx(48.7));
  CHECK(habs::steady_state_temp(3.0, cfg) == doctest::Approx(59.0));
  CHECK(error_code([] { PlantConfig::preset("lab"); }) == habs::Errc::InvalidConfig);
}

TEST_CASE("static map is continuous and strictly increasing") {
  const auto cfg = PlantConfig::canonical();
  for (double brk : {1.0, 2.0}) {
    const double left = habs::steady_state_temp(std::nextafter(brk, 0.0), cfg);
    const double right = habs::steady_state_temp(brk, cfg);
    CHECK(std::abs(left - right) < 1e-12);
  }
  double prev = habs::steady_state_temp(0.0, cfg);
  for (int i = 1; i <= 4000; ++i) {
    const double t = habs::steady_state_temp(i * 1e-3, cfg);
    REQUIRE(t > prev);
    prev = t;
  }
}

TEST_CASE("equilibrium_input inverts the static map") {
  const auto cfg = habs::set_throttle(PlantConfig::canonical(), 0.85);
  for (int i = 0; i <= 400; ++i) {
    const double u = i * 0.01;
    CHECK(habs::equilibrium_input(habs::steady_state_temp(u, cfg), cfg) == doctest::Approx(u).epsilon(1e-12));
  }
  CHECK(habs::equilibrium_input(20.0, cfg) == 0.0);
}

TEST_CASE("throttle scales the gains") {
  const auto cfg = PlantConfig::canonical();
  CHECK(habs::steady_state_temp(1.0, habs::set_throttle(cfg, 1.0)) == habs::steady_state_temp(1.0, cfg));
  CHECK(habs::steady_state_temp(1.0, habs::set_throttle(cfg, 0.8)) == doctest::Approx(37.2));
  CHECK(error_code([&] { habs::set_throttle(cfg, 0.0); }) == habs::Errc::NonPositiveFactor);
  CHECK(error_code([&] { habs::set_throttle(cfg, -1.0); }) == habs::Errc::NonPositiveFactor);
}

TEST_CASE("config validation") {
  auto bad = PlantConfig::canonical();
  bad.region_taus[1] = 0.0;
  CHECK(error_code([&] { bad.validate(); }) == habs::Errc::InvalidConfig);
  bad = PlantConfig::canonical();
  bad.region_breaks = {2.0, 1.0};
  CHECK(error_code([&] { bad.validate(); }) == habs::Errc::InvalidConfig);
  bad = PlantConfig::canonical();
  bad.amp_gain = 3.0;
  CHECK(error_code([&] { bad.validate(); }) == habs::Errc::InvalidConfig);
  CHECK_NOTHROW(PlantConfig::canonical().validate());
  CHECK(habs::plant_drive_volts(4.0, PlantConfig::canonical()) == doctest::Approx(13.0));
}

TEST_CASE("plant_tick fixed point and one time constant") {
  const auto cfg = PlantConfig::canonical();
  auto s = habs::make_plant_state(cfg, habs::steady_state_temp(2.5, cfg));
  const double before = s.temp;
  habs::plant_tick(s, 2.5, 0.1, cfg);
  CHECK(s.temp == doctest::Approx(before).epsilon(1e-15));

  s = habs::make_plant_state(cfg, 29.6);
  for (int k = 0; k < 65; ++k) habs::plant_tick(s, 1.0, 0.1, cfg);
  CHECK(s.temp == doctest::Approx(35.6051453088713).epsilon(1e-10));
  CHECK(s.t == doctest::Approx(6.5));
}

TEST_CASE("plant_tick preconditions") {
  const auto cfg = PlantConfig::canonical();
  auto s = habs::make_plant_state(cfg, 29.6);
  CHECK(error_code([&] { habs::plant_tick(s, 1.0, 0.0, cfg); }) == habs::Errc::NonPositiveTimestep);
  CHECK(error_code([&] { habs::plant_tick(s, 5.0, 0.1, cfg); }) == habs::Errc::InputOutOfRange);
}

TEST_CASE("exact discretization tends to the ODE") {
  const auto cfg = PlantConfig::canonical();
  const double t0 = 30.0;
  const double slope = (habs::steady_state_temp(0.5, cfg) - t0) / 6.5;
  for (double ts : {1e-2, 1e-3, 1e-4}) {
    auto s = habs::make_plant_state(cfg, t0);
    habs::plant_tick(s, 0.5, ts, cfg);
    CHECK(std::abs((s.temp - t0) / ts - slope) < 2.0 * std::abs(slope) * ts / 6.5);
  }
}

TEST_CASE("in-region trajectories match the analytic solution for any Ts") {
  const auto cfg = PlantConfig::canonical();
  struct Case { double u; double t0; double tau; };
  for (const auto& c : {Case{1.0, 29.6, 6.5}, Case{0.3, 34.0, 6.5}, Case{2.0, 39.1, 15.0},
                        Case{1.2, 47.0, 15.0}, Case{3.0, 47.1, 16.0}, Case{4.0, 60.0, 16.0}}) {
    for (double ts : {0.01, 0.1, 0.5}) {
      auto s = habs::make_plant_state(cfg, c.t0);
      const double target = habs::steady_state_temp(c.u, cfg);
      const int n = static_cast<int>(std::lround(30.0 / ts));
      for (int k = 1; k <= n; ++k) {
        habs::plant_tick(s, c.u, ts, cfg);
        const double expected = oracle::first_order(c.t0, target, c.tau, k * ts);
        REQUIRE(std::abs(s.temp - expected) <= 1e-10 * std::abs(expected));
      }
    }
  }
}

TEST_CASE("up and down steps on one segment share the time constant") {
  const auto cfg = PlantConfig::canonical();
  CHECK(habs::active_time_constant(2.0, habs::steady_state_temp(1.0, cfg), cfg) == 15.0);
  CHECK(habs::active_time_constant(1.0, habs::steady_state_temp(2.0, cfg), cfg) == 15.0);
  CHECK(habs::active_time_constant(1.0, habs::steady_state_temp(0.0, cfg), cfg) == 6.5);
  CHECK(habs::active_time_constant(0.0, habs::steady_state_temp(1.0, cfg), cfg) == 6.5);
}

TEST_CASE("convergence is monotone without overshoot") {
  const auto cfg = PlantConfig::canonical();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(0.0, 4.0), td(25.0, 70.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double u = ud(rng);
    auto s = habs::make_plant_state(cfg, td(rng));
    const double target = habs::steady_state_temp(u, cfg);
    double gap = std::abs(s.temp - target);
    const double sign = s.temp > target ? 1.0 : -1.0;
    for (int k = 0; k < 600; ++k) {
      habs::plant_tick(s, u, 0.1, cfg);
      const double g = std::abs(s.temp - target);
      if (gap > 1e-9) REQUIRE(g < gap);
      REQUIRE(sign * (s.temp - target) >= 0.0);
      gap = g;
    }
  }
}

TEST_CASE("measure without noise or delay") {
  const auto cfg = PlantConfig::canonical();
  const auto calib = habs::CalibrationPoly::pt326();
  auto s = habs::make_plant_state(cfg, 38.1792);
  auto m = habs::measure(s, cfg, calib);
  CHECK(std::abs(m.voltage) < 1e-12);
  CHECK(m.temperature == doctest::Approx(38.1792).epsilon(1e-14));

  s = habs::make_plant_state(cfg, 29.6);
  for (int k = 0; k < 200; ++k) {
    habs::plant_tick(s, 2.2, 0.1, cfg);
    m = habs::measure(s, cfg, calib);
    REQUIRE(std::abs(m.temperature - s.temp) < 1e-9);
    REQUIRE(m.temperature == habs::eval_poly(calib, m.voltage));
  }
}

TEST_CASE("measure replays the transport delay") {
  auto cfg = PlantConfig::canonical();
  cfg.sensor_delay_s = 0.5;
  const auto calib = habs::CalibrationPoly::pt326();
  auto s = habs::make_plant_state(cfg, 29.6);
  std::vector<double> internal, sensed;
  for (int k = 0; k < 120; ++k) {
    internal.push_back(s.temp);
    sensed.push_back(habs::measure(s, cfg, calib).temperature);
    habs::plant_tick(s, k < 60 ? 3.0 : 0.5, 0.1, cfg);
  }
  const auto expected = oracle::delay_replay(internal, 5);
  for (std::size_t k = 0; k < internal.size(); ++k) REQUIRE(std::abs(sensed[k] - expected[k]) < 1e-9);
}

TEST_CASE("noise is seeded and reproducible") {
  auto cfg = PlantConfig::canonical();
  cfg.noise_sigma = 0.2;
  cfg.noise_seed = 99;
  const auto calib = habs::CalibrationPoly::pt326();
  auto run = [&] {
    auto s = habs::make_plant_state(cfg, 40.0);
    std::vector<double> out;
    for (int k = 0; k < 500; ++k) {
      out.push_back(habs::measure(s, cfg, calib).temperature);
      habs::plant_tick(s, 1.5, 0.1, cfg);
    }
    return out;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);

  double mean = 0.0, var = 0.0;
  auto s = habs::make_plant_state(cfg, 40.0);
  const int n = 20000;
  for (int k = 0; k < n; ++k) mean += habs::measure(s, cfg, calib).temperature - 40.0;
  mean /= n;
  s = habs::make_plant_state(cfg, 40.0);
  for (int k = 0; k < n; ++k) {
    const double d = habs::measure(s, cfg, calib).temperature - 40.0;
    var += d * d;
  }
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::sqrt(var / n) == doctest::Approx(0.2).epsilon(0.03));
}
