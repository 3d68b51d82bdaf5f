#include "habs/plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kTimeEps = 1e-9;

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::InvalidConfig, fmt::format("invalid plant config: {}", what));
}

double region_low(const PlantConfig& cfg, std::size_t r) {
  return r == 0 ? 0.0 : cfg.region_breaks[r - 1];
}

double region_high(const PlantConfig& cfg, std::size_t r) {
  return r + 1 < cfg.region_count() ? cfg.region_breaks[r] : std::numeric_limits<double>::infinity();
}

}  // namespace

PlantConfig PlantConfig::canonical() { return PlantConfig{}; }

PlantConfig PlantConfig::empirical() {
  PlantConfig cfg;
  cfg.region_gains = {39.5 - 29.6, 48.7 - 39.5, 59.0 - 48.7};
  return cfg;
}

PlantConfig PlantConfig::preset(std::string_view name) {
  if (name == "canonical") return canonical();
  if (name == "empirical") return empirical();
  throw Error(Errc::InvalidConfig, fmt::format("unknown plant preset '{}'", name));
}

void PlantConfig::validate() const {
  require(std::isfinite(ambient_temp), "ambient_temp must be finite");
  require(!region_gains.empty(), "at least one region");
  require(region_taus.size() == region_gains.size(), "region_taus size must match region_gains");
  require(region_breaks.size() + 1 == region_gains.size(),
          "region_breaks must have one entry fewer than region_gains");
  for (double k : region_gains) require(std::isfinite(k) && k > 0.0, "gains must be > 0");
  for (double tau : region_taus) require(std::isfinite(tau) && tau > 0.0, "taus must be > 0");
  double prev = 0.0;
  for (double b : region_breaks) {
    require(std::isfinite(b) && b > prev, "breaks must be > 0 and strictly increasing");
    prev = b;
  }
  require(daq_out_range[0] >= 0.0 && daq_out_range[1] > daq_out_range[0], "daq_out_range");
  require(plant_in_range[1] > plant_in_range[0], "plant_in_range");
  require(amp_gain > 0.0, "amp_gain must be > 0");
  require(std::abs(amp_gain * daq_out_range[1] - plant_in_range[1]) <= 1e-9 * plant_in_range[1],
          "amp_gain * daq max must equal plant input max");
  require(std::isfinite(sensor_delay_s) && sensor_delay_s >= 0.0, "sensor_delay_s must be >= 0");
  require(std::isfinite(throttle_factor) && throttle_factor > 0.0, "throttle_factor must be > 0");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise_sigma must be >= 0");
}

std::size_t plant_region(double u_daq, const PlantConfig& cfg) noexcept {
  const auto it = std::upper_bound(cfg.region_breaks.begin(), cfg.region_breaks.end(), u_daq);
  return static_cast<std::size_t>(it - cfg.region_breaks.begin());
}

double steady_state_temp(double u_daq, const PlantConfig& cfg) {
  if (!(u_daq >= cfg.daq_out_range[0] && u_daq <= cfg.daq_out_range[1])) {
    throw Error(Errc::InputOutOfRange,
                fmt::format("DAQ input {} outside [{}, {}]", u_daq, cfg.daq_out_range[0],
                            cfg.daq_out_range[1]));
  }
  double rise = 0.0;
  for (std::size_t r = 0; r < cfg.region_count(); ++r) {
    const double lo = region_low(cfg, r);
    const double hi = region_high(cfg, r);
    rise += cfg.region_gains[r] * std::clamp(u_daq - lo, 0.0, hi - lo);
  }
  return cfg.ambient_temp + cfg.throttle_factor * rise;
}

double equilibrium_input(double temp, const PlantConfig& cfg) noexcept {
  double remaining = (temp - cfg.ambient_temp) / cfg.throttle_factor;
  if (remaining <= 0.0) return 0.0;
  for (std::size_t r = 0; r < cfg.region_count(); ++r) {
    const double lo = region_low(cfg, r);
    const double width = region_high(cfg, r) - lo;
    const double span = cfg.region_gains[r] * width;
    if (remaining <= span) return lo + remaining / cfg.region_gains[r];
    remaining -= span;
  }
  return std::numeric_limits<double>::infinity();  // unreachable: last region is unbounded
}

double active_time_constant(double u_daq, double temp, const PlantConfig& cfg) noexcept {
  const double midpoint = 0.5 * (u_daq + equilibrium_input(temp, cfg));
  return cfg.region_taus[plant_region(midpoint, cfg)];
}

double plant_drive_volts(double u_daq, const PlantConfig& cfg) noexcept {
  return cfg.amp_gain * u_daq;
}

PlantConfig set_throttle(PlantConfig cfg, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(Errc::NonPositiveFactor, fmt::format("throttle factor must be > 0, got {}", factor));
  }
  cfg.throttle_factor = factor;
  return cfg;
}

PlantState make_plant_state(const PlantConfig& cfg, double initial_temp) {
  PlantState state;
  state.temp = initial_temp;
  state.t = 0.0;
  state.delay_buffer.push_back({0.0, initial_temp});
  state.rng.seed(cfg.noise_seed);
  return state;
}

void plant_tick(PlantState& state, double u_daq, double ts, const PlantConfig& cfg) {
  if (!(ts > 0.0) || !std::isfinite(ts)) {
    throw Error(Errc::NonPositiveTimestep, fmt::format("timestep must be > 0, got {}", ts));
  }
  const double target = steady_state_temp(u_daq, cfg);
  const double tau = active_time_constant(u_daq, state.temp, cfg);
  state.temp = target + (state.temp - target) * std::exp(-ts / tau);
  state.t += ts;

  state.delay_buffer.push_back({state.t, state.temp});
  // Keep exactly one sample at or before t - delay at the front.
  const double horizon = state.t - cfg.sensor_delay_s + kTimeEps;
  while (state.delay_buffer.size() >= 2 && state.delay_buffer[1].t <= horizon) {
    state.delay_buffer.pop_front();
  }
}

Measurement measure(PlantState& state, const PlantConfig& cfg, const CalibrationPoly& calib) {
  double sensed = state.delay_buffer.empty() ? state.temp : state.delay_buffer.front().temp;
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    sensed += noise(state.rng);
  }
  Measurement m;
  m.voltage = invert_poly(calib, sensed);
  m.temperature = eval_poly(calib, m.voltage);
  return m;
}

}  // namespace habs
