#include "habs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kTimeEps = 1e-9;

std::optional<double> schedule_value(const std::vector<SchedulePoint>& schedule, double t) {
  std::optional<double> value;
  for (const auto& p : schedule) {
    if (p.t > t + kTimeEps) break;
    value = p.value;
  }
  return value;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidConfig, "invalid scenario: " + what);
}

void require_sorted(const std::vector<SchedulePoint>& schedule, const char* name) {
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    require(std::isfinite(schedule[i].t) && schedule[i].t >= 0.0 &&
                std::isfinite(schedule[i].value),
            fmt::format("{} entry {} must have finite t >= 0", name, i));
    if (i > 0) {
      require(schedule[i].t >= schedule[i - 1].t, fmt::format("{} must be time-sorted", name));
    }
  }
}

// Interpolated time at which the normalised response first reaches level.
std::optional<double> first_crossing(std::span<const double> times, std::span<const double> norm,
                                     double level) {
  if (norm.empty()) return std::nullopt;
  if (norm[0] >= level) return times[0];
  for (std::size_t i = 1; i < norm.size(); ++i) {
    if (norm[i] >= level) {
      const double frac = (level - norm[i - 1]) / (norm[i] - norm[i - 1]);
      return times[i - 1] + frac * (times[i] - times[i - 1]);
    }
  }
  return std::nullopt;
}

}  // namespace

double Scenario::setpoint_at(double t) const {
  return schedule_value(setpoints, t).value_or(start_temp());
}

double Scenario::throttle_at(double t) const {
  return schedule_value(throttle, t).value_or(plant.throttle_factor);
}

void Scenario::validate() const {
  require(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
  require(std::isfinite(ts) && ts > 0.0, "ts must be > 0");
  require_sorted(setpoints, "setpoints");
  require_sorted(throttle, "throttle");
  for (const auto& p : throttle) require(p.value > 0.0, "throttle factors must be > 0");
  require(std::isfinite(start_temp()), "initial_temp must be finite");
  plant.validate();
  controller.validate();
  require(std::abs(controller.ts - ts) <= 1e-12 * ts,
          fmt::format("controller ts {} differs from scenario ts {}", controller.ts, ts));
  require(controller.sat_low >= plant.daq_out_range[0] &&
              controller.sat_high <= plant.daq_out_range[1],
          "controller saturation must lie inside the plant's DAQ range");
}

StepMetrics compute_metrics(std::span<const double> times, std::span<const double> values,
                            double amplitude, const MetricOptions& opts) {
  if (amplitude == 0.0 || !std::isfinite(amplitude)) {
    throw Error(Errc::ZeroAmplitude, "step amplitude must be non-zero");
  }
  if (times.size() != values.size() || values.empty()) {
    throw Error(Errc::InvalidConfig, "metric segment needs matching, non-empty series");
  }
  const double y0 = values[0];
  const double target = y0 + amplitude;
  const double t0 = times[0];

  std::vector<double> norm(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) norm[i] = (values[i] - y0) / amplitude;

  const auto t_low = first_crossing(times, norm, opts.rise_low);
  if (!t_low) {
    throw Error(Errc::NeverRises,
                fmt::format("response never reaches {:.0f}% of the step", opts.rise_low * 100.0));
  }
  const auto t_high = first_crossing(times, norm, opts.rise_high);

  StepMetrics m;
  const double inf = std::numeric_limits<double>::infinity();
  m.rise_time = t_high ? *t_high - *t_low : inf;

  const double peak = *std::max_element(norm.begin(), norm.end());
  m.overshoot = std::max(0.0, (peak - 1.0) * 100.0);

  // Last sample outside the band decides the settling time.
  m.settling_time = 0.0;
  const double band = opts.settle_band * std::abs(amplitude);
  for (std::size_t i = values.size(); i-- > 0;) {
    if (std::abs(values[i] - target) > band) {
      m.settling_time = i + 1 < values.size() ? times[i + 1] - t0 : inf;
      break;
    }
  }
  return m;
}

ClosedLoop::ClosedLoop(Scenario scenario, CalibrationPoly calib)
    : scenario_(std::move(scenario)), calib_(calib) {
  scenario_.validate();
  if (!is_strictly_increasing(calib_)) {
    throw Error(Errc::NonMonotonePoly, "calibration polynomial is not strictly increasing");
  }
  reset();
}

void ClosedLoop::reset() {
  setpoint_override_.reset();
  throttle_override_.reset();
  tick_index_ = 0;

  plant_cfg_ = scenario_.plant;
  plant_cfg_.noise_seed = scenario_.seed;
  plant_cfg_.throttle_factor = scenario_.throttle_at(0.0);
  plant_ = make_plant_state(plant_cfg_, scenario_.start_temp());

  controller_ = SwitchedController(scenario_.controller);
  const double rest = std::clamp(equilibrium_input(scenario_.start_temp(), plant_cfg_),
                                 controller_.config.sat_low, controller_.config.sat_high);
  controller_.integrator = rest;
  controller_.u_prev = rest;
}

void ClosedLoop::override_setpoint(double setpoint) {
  if (!std::isfinite(setpoint)) {
    throw Error(Errc::InputOutOfRange, "setpoint must be finite");
  }
  setpoint_override_ = setpoint;
}

void ClosedLoop::override_throttle(double factor) {
  plant_cfg_ = set_throttle(plant_cfg_, factor);
  throttle_override_ = factor;
}

void ClosedLoop::set_controller(ControllerConfig cfg) {
  cfg.validate();
  if (std::abs(cfg.ts - scenario_.ts) > 1e-12 * scenario_.ts) {
    throw Error(Errc::InvalidConfig, "controller ts must match the loop period");
  }
  controller_.config = std::move(cfg);
  controller_.u_prev =
      std::clamp(controller_.u_prev, controller_.config.sat_low, controller_.config.sat_high);
}

LogRow ClosedLoop::tick() {
  const double t = time();
  LogRow row;
  row.t = t;
  row.setpoint = setpoint_override_.value_or(scenario_.setpoint_at(t));
  plant_cfg_.throttle_factor = throttle_override_.value_or(scenario_.throttle_at(t));
  row.throttle = plant_cfg_.throttle_factor;
  row.temp_internal = plant_.temp;

  const auto meas = measure(plant_, plant_cfg_, calib_);
  row.temp_measured = meas.temperature;
  row.volts_measured = meas.voltage;
  row.error = row.setpoint - meas.temperature;

  const auto out = switched_tick(controller_, row.error);
  row.u_daq = out.u_daq;
  row.u_raw = out.u_raw;
  row.region = out.region;
  row.saturated = out.saturated;
  row.integrator = controller_.integrator;
  row.u_plant = plant_drive_volts(out.u_daq, plant_cfg_);

  plant_tick(plant_, out.u_daq, scenario_.ts, plant_cfg_);
  ++tick_index_;
  return row;
}

SimLog run_closed_loop(const Scenario& scenario, const CalibrationPoly& calib,
                       const MetricOptions& opts) {
  ClosedLoop loop(scenario, calib);
  SimLog log;
  log.ts = scenario.ts;
  const auto ticks = static_cast<std::size_t>(std::llround(scenario.duration / scenario.ts));
  log.rows.reserve(ticks);
  for (std::size_t k = 0; k < ticks; ++k) {
    log.rows.push_back(loop.tick());
    if (k > 0 && log.rows[k].region != log.rows[k - 1].region) ++log.switch_count;
  }

  std::vector<std::size_t> starts;
  double previous = scenario.start_temp();
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    if (log.rows[k].setpoint != previous) starts.push_back(k);
    previous = log.rows[k].setpoint;
  }
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const std::size_t begin = starts[s];
    const std::size_t end = s + 1 < starts.size() ? starts[s + 1] : log.rows.size();
    StepSummary summary;
    summary.start_index = begin;
    summary.t_start = log.rows[begin].t;
    summary.from_temp = log.rows[begin].temp_internal;
    summary.setpoint = log.rows[begin].setpoint;
    std::vector<double> times;
    std::vector<double> temps;
    for (std::size_t k = begin; k < end; ++k) {
      times.push_back(log.rows[k].t);
      temps.push_back(log.rows[k].temp_internal);
    }
    try {
      summary.metrics = compute_metrics(times, temps, summary.setpoint - summary.from_temp, opts);
    } catch (const Error& e) {
      summary.failure = fmt::format("{}: {}", to_string(e.code()), e.what());
    }
    log.steps.push_back(std::move(summary));
  }
  return log;
}

StepRecord run_open_loop_step(double u0, double u1, double duration, double ts,
                              const PlantConfig& plant, const CalibrationPoly& calib,
                              double pre_step_s) {
  plant.validate();
  for (double u : {u0, u1}) {
    if (!(u >= plant.daq_out_range[0] && u <= plant.daq_out_range[1])) {
      throw Error(Errc::InputOutOfRange,
                  fmt::format("step input {} outside [{}, {}]", u, plant.daq_out_range[0],
                              plant.daq_out_range[1]));
    }
  }
  if (!(ts > 0.0)) throw Error(Errc::NonPositiveTimestep, "timestep must be > 0");
  if (!(duration > 0.0) || !(pre_step_s >= 0.0)) {
    throw Error(Errc::InvalidConfig, "step durations must be positive");
  }

  const auto pre = static_cast<std::size_t>(std::llround(pre_step_s / ts));
  const auto post = static_cast<std::size_t>(std::llround(duration / ts));

  StepRecord rec;
  rec.ts = ts;
  rec.u0 = u0;
  rec.u1 = u1;
  rec.t_step = static_cast<double>(pre) * ts;
  rec.samples.reserve(pre + post + 1);

  auto state = make_plant_state(plant, steady_state_temp(u0, plant));
  for (std::size_t i = 0; i <= pre + post; ++i) {
    rec.samples.push_back(measure(state, plant, calib).temperature);
    if (i < pre + post) plant_tick(state, i < pre ? u0 : u1, ts, plant);
  }
  return rec;
}

}  // namespace habs
