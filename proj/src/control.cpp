#include "habs/control.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr std::array<const char*, 10> kRoman{"I", "II", "III", "IV", "V",
                                             "VI", "VII", "VIII", "IX", "X"};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidConfig, "invalid controller config: " + what);
}

}  // namespace

ControllerConfig ControllerConfig::standard() {
  ControllerConfig cfg;
  const double inf = std::numeric_limits<double>::infinity();
  cfg.regions = {
      {0.0, 1.0, {1.3, 0.11}},
      {1.0, 2.0, {1.5, 0.13}},
      {2.0, inf, {1.8, 0.12}},
  };
  return cfg;
}

void ControllerConfig::validate() const {
  require(!regions.empty(), "at least one region");
  require(regions.front().u_low == 0.0, "first region must start at 0");
  require(std::isinf(regions.back().u_high) && regions.back().u_high > 0.0,
          "last region must be unbounded");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    require(r.u_high > r.u_low, fmt::format("region {} is empty", i));
    require(std::isfinite(r.gains.kp) && r.gains.kp >= 0.0 && std::isfinite(r.gains.ki) &&
                r.gains.ki >= 0.0,
            fmt::format("region {} gains must be >= 0", i));
    if (i > 0) {
      require(regions[i - 1].u_high == r.u_low,
              fmt::format("gap or overlap between regions {} and {}", i - 1, i));
    }
  }
  require(std::isfinite(ts) && ts > 0.0, "ts must be > 0");
  require(std::isfinite(sat_low) && std::isfinite(sat_high) && sat_low >= 0.0 &&
              sat_high > sat_low,
          "saturation limits must satisfy 0 <= sat_low < sat_high");
}

std::size_t select_region(double u_prev, std::span<const ControllerRegion> regions) {
  if (u_prev < 0.0 || std::isnan(u_prev)) {
    throw Error(Errc::NegativeInput, fmt::format("plant input {} is negative", u_prev));
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (u_prev >= regions[i].u_low && u_prev < regions[i].u_high) return i;
  }
  throw Error(Errc::InvalidConfig, fmt::format("no controller region covers u = {}", u_prev));
}

PiUpdate pi_tick(const PIGains& gains, double integrator, double error, double ts) noexcept {
  PiUpdate out;
  out.integrator = integrator + gains.ki * ts * error;
  out.u_raw = gains.kp * error + out.integrator;
  return out;
}

SwitchedController::SwitchedController(ControllerConfig cfg) : config(std::move(cfg)) {
  config.validate();
  u_prev = config.sat_low;
}

ControlOutput switched_tick(SwitchedController& ctrl, double error) {
  const auto& cfg = ctrl.config;
  ControlOutput out;
  out.region = select_region(ctrl.u_prev, cfg.regions);

  const auto update = pi_tick(cfg.regions[out.region].gains, ctrl.integrator, error, cfg.ts);
  out.u_raw = update.u_raw;
  out.u_daq = std::clamp(update.u_raw, cfg.sat_low, cfg.sat_high);
  out.saturated = out.u_daq != update.u_raw;

  const bool pushing_deeper = (update.u_raw > cfg.sat_high && error > 0.0) ||
                              (update.u_raw < cfg.sat_low && error < 0.0);
  out.integration_held = cfg.anti_windup && out.saturated && pushing_deeper;
  if (!out.integration_held) ctrl.integrator = update.integrator;
  ctrl.u_prev = out.u_daq;
  return out;
}

std::string region_label(std::size_t region) {
  if (region < kRoman.size()) return kRoman[region];
  return fmt::format("R{}", region + 1);
}

std::size_t parse_region_label(const std::string& label) {
  for (std::size_t i = 0; i < kRoman.size(); ++i) {
    if (label == kRoman[i]) return i;
  }
  if (label.size() > 1 && label[0] == 'R') {
    try {
      const auto n = std::stoul(label.substr(1));
      if (n >= 1) return n - 1;
    } catch (const std::exception&) {
    }
  }
  throw Error(Errc::ParseError, fmt::format("unknown region label '{}'", label));
}

}  // namespace habs
