#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace habs {

struct PIGains {
  double kp = 0.0;  // DAQ volts per °C
  double ki = 0.0;  // DAQ volts per (°C·s)
};

struct ControllerRegion {
  double u_low = 0.0;
  double u_high = std::numeric_limits<double>::infinity();
  PIGains gains;
};

struct ControllerConfig {
  std::vector<ControllerRegion> regions;
  double ts = 0.1;
  double sat_low = 0.0;
  double sat_high = 4.0;
  bool anti_windup = true;

  /// Three PI controllers switched at plant inputs 1 and 2:
  /// (1.3, 0.11), (1.5, 0.13), (1.8, 0.12).
  static ControllerConfig standard();

  /// Throws InvalidConfig unless the regions partition [0, ∞), gains are
  /// non-negative, ts > 0 and 0 <= sat_low < sat_high.
  void validate() const;
};

/// Index of the half-open interval containing u_prev. Throws NegativeInput.
std::size_t select_region(double u_prev, std::span<const ControllerRegion> regions);

struct PiUpdate {
  double u_raw = 0.0;
  double integrator = 0.0;
};

/// Backward-Euler PI: integrator' = integrator + ki·ts·e, u = kp·e + integrator'.
PiUpdate pi_tick(const PIGains& gains, double integrator, double error, double ts) noexcept;

/// Region-switched PI sharing a single integrator across regions, so a
/// switch only changes the gains applied to the current error.
struct SwitchedController {
  ControllerConfig config;
  double integrator = 0.0;
  double u_prev = 0.0;  // last saturated output, selects the next region

  SwitchedController() : SwitchedController(ControllerConfig::standard()) {}
  explicit SwitchedController(ControllerConfig cfg);
};

struct ControlOutput {
  double u_daq = 0.0;
  double u_raw = 0.0;
  std::size_t region = 0;
  bool saturated = false;
  bool integration_held = false;  // anti-windup discarded this tick's integral update
};

/// One controller period: region from the previous output, PI update,
/// clamp, and conditional integration when the clamp is active and the
/// error pushes further into it.
ControlOutput switched_tick(SwitchedController& ctrl, double error);

/// "I", "II", "III", ... for region indices 0, 1, 2, ...
std::string region_label(std::size_t region);

/// Inverse of region_label; throws ParseError.
std::size_t parse_region_label(const std::string& label);

}  // namespace habs
