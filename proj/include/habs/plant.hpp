#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <string_view>
#include <vector>

#include "habs/calib.hpp"

namespace habs {

/// Parameters of the virtual hot-air blower. Region r covers DAQ inputs
/// [break_{r-1}, break_r) with the first region starting at 0 and the last
/// unbounded; each region contributes an incremental static gain and owns a
/// first-order time constant.
struct PlantConfig {
  double ambient_temp = 29.6;                    // °C
  std::vector<double> region_gains{9.5, 8.0, 10.0};  // °C per DAQ volt
  std::vector<double> region_taus{6.5, 15.0, 16.0};  // s
  std::vector<double> region_breaks{1.0, 2.0};       // DAQ volts
  std::array<double, 2> daq_out_range{0.0, 4.0};
  std::array<double, 2> plant_in_range{0.0, 13.0};
  double amp_gain = 3.25;
  double sensor_delay_s = 0.0;
  double throttle_factor = 1.0;
  double noise_sigma = 0.0;  // °C
  std::uint64_t noise_seed = 0;

  /// Regional models exactly as identified on the rig.
  static PlantConfig canonical();
  /// Gains re-anchored on the measured step endpoints 29.6/39.5/48.7/59.0 °C.
  static PlantConfig empirical();
  /// "canonical" or "empirical"; InvalidConfig otherwise.
  static PlantConfig preset(std::string_view name);

  std::size_t region_count() const noexcept { return region_gains.size(); }

  /// Throws InvalidConfig on the first violated invariant.
  void validate() const;
};

/// Region index for a DAQ input: half-open intervals, break values belong to
/// the upper region.
std::size_t plant_region(double u_daq, const PlantConfig& cfg) noexcept;

/// Piecewise-linear static map, continuous at the breaks.
/// Throws InputOutOfRange outside the DAQ output range.
double steady_state_temp(double u_daq, const PlantConfig& cfg);

/// Inverse of the static map, with the last region extrapolated upwards and
/// temperatures at or below ambient mapped to 0.
double equilibrium_input(double temp, const PlantConfig& cfg) noexcept;

/// Time constant governing a tick driven by u_daq from temperature temp: the
/// region containing the midpoint of the operating segment between
/// equilibrium_input(temp) and u_daq.
double active_time_constant(double u_daq, double temp, const PlantConfig& cfg) noexcept;

/// Heater drive voltage after the ×amp_gain power stage.
double plant_drive_volts(double u_daq, const PlantConfig& cfg) noexcept;

/// Throws NonPositiveFactor for factor <= 0.
PlantConfig set_throttle(PlantConfig cfg, double factor);

struct DelaySample {
  double t = 0.0;
  double temp = 0.0;
};

struct PlantState {
  double temp = 0.0;  // °C, before delay and noise
  double t = 0.0;     // s
  std::deque<DelaySample> delay_buffer;
  std::mt19937_64 rng;
};

/// State at rest at initial_temp, delay buffer pre-filled with it.
PlantState make_plant_state(const PlantConfig& cfg, double initial_temp);

/// Exact zero-order-hold update of the first-order lag over one period.
/// Throws InputOutOfRange or NonPositiveTimestep.
void plant_tick(PlantState& state, double u_daq, double ts, const PlantConfig& cfg);

struct Measurement {
  double voltage = 0.0;      // V, what the DAQ reads
  double temperature = 0.0;  // °C, calibration applied to that voltage
};

/// Sensor reading: delayed temperature plus seeded Gaussian noise, converted
/// to volts through the inverse calibration and back. Advances the noise
/// generator when noise_sigma > 0.
Measurement measure(PlantState& state, const PlantConfig& cfg, const CalibrationPoly& calib);

}  // namespace habs
