#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "habs/calib.hpp"
#include "habs/control.hpp"
#include "habs/plant.hpp"
#include "habs/sysid.hpp"

namespace habs {

/// A (time, value) breakpoint of a zero-order-hold schedule.
struct SchedulePoint {
  double t = 0.0;
  double value = 0.0;
};

struct Scenario {
  double duration = 60.0;  // s
  double ts = 0.1;         // s
  std::vector<SchedulePoint> setpoints;  // °C; initial temperature before the first entry
  std::vector<SchedulePoint> throttle;   // factor; plant config value before the first entry
  std::string plant_preset = "canonical";
  PlantConfig plant = PlantConfig::canonical();
  ControllerConfig controller = ControllerConfig::standard();
  std::optional<double> initial_temp;  // defaults to the plant's ambient temperature
  std::uint64_t seed = 0;

  double start_temp() const { return initial_temp.value_or(plant.ambient_temp); }
  double setpoint_at(double t) const;
  double throttle_at(double t) const;

  /// Throws InvalidConfig.
  void validate() const;
};

struct LogRow {
  double t = 0.0;
  double setpoint = 0.0;
  double temp_internal = 0.0;
  double temp_measured = 0.0;
  double volts_measured = 0.0;
  double error = 0.0;
  double u_daq = 0.0;
  double u_plant = 0.0;
  std::size_t region = 0;
  // Not part of the CSV log.
  double u_raw = 0.0;
  double integrator = 0.0;  // after this tick's update
  double throttle = 1.0;
  bool saturated = false;
};

struct StepMetrics {
  double rise_time = 0.0;      // s
  double overshoot = 0.0;      // percent of the step amplitude
  double settling_time = 0.0;  // s
};

struct MetricOptions {
  double rise_low = 0.1;
  double rise_high = 0.9;
  double settle_band = 0.02;
};

/// Metrics of one setpoint step. times and values are the segment starting
/// at the step; the response is taken relative to values[0] and the target
/// is values[0] + amplitude. Rise or settling that never happens inside the
/// segment is reported as +infinity.
/// Throws ZeroAmplitude or NeverRises.
StepMetrics compute_metrics(std::span<const double> times, std::span<const double> values,
                            double amplitude, const MetricOptions& opts = {});

struct StepSummary {
  std::size_t start_index = 0;
  double t_start = 0.0;
  double from_temp = 0.0;
  double setpoint = 0.0;
  std::optional<StepMetrics> metrics;
  std::string failure;  // why metrics are missing
};

struct SimLog {
  double ts = 0.1;
  std::vector<LogRow> rows;
  std::size_t switch_count = 0;
  std::vector<StepSummary> steps;
};

/// Fixed-step closed loop of plant, sensor chain and switched controller.
/// Each tick measures, computes the error, runs the controller and then
/// advances the plant, in that order. The controller starts at the
/// equilibrium input of the initial temperature.
class ClosedLoop {
 public:
  explicit ClosedLoop(Scenario scenario, CalibrationPoly calib = CalibrationPoly::pt326());

  LogRow tick();

  /// Back to t = 0 with the scenario's initial state; clears overrides.
  void reset();

  /// Replace the schedule value from the next tick on, until reset().
  void override_setpoint(double setpoint);
  /// Throws NonPositiveFactor.
  void override_throttle(double factor);
  /// Swaps gains keeping the integrator and last output. Throws InvalidConfig.
  void set_controller(ControllerConfig cfg);

  double time() const noexcept { return static_cast<double>(tick_index_) * scenario_.ts; }
  std::size_t tick_index() const noexcept { return tick_index_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  const SwitchedController& controller() const noexcept { return controller_; }
  const PlantState& plant_state() const noexcept { return plant_; }
  const PlantConfig& plant_config() const noexcept { return plant_cfg_; }

 private:
  Scenario scenario_;
  CalibrationPoly calib_;
  PlantConfig plant_cfg_;
  PlantState plant_;
  SwitchedController controller_;
  std::size_t tick_index_ = 0;
  std::optional<double> setpoint_override_;
  std::optional<double> throttle_override_;
};

SimLog run_closed_loop(const Scenario& scenario,
                       const CalibrationPoly& calib = CalibrationPoly::pt326(),
                       const MetricOptions& opts = {});

/// Open-loop step experiment: the plant starts settled at u0, u0 is held for
/// pre_step_s, then u1 is applied for duration seconds. Samples are the
/// measured temperatures. Throws InputOutOfRange.
StepRecord run_open_loop_step(double u0, double u1, double duration, double ts,
                              const PlantConfig& plant,
                              const CalibrationPoly& calib = CalibrationPoly::pt326(),
                              double pre_step_s = 5.0);

}  // namespace habs
