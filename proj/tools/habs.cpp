// habs: batch and live front end of the virtual PT326 process trainer.
//
//   habs calibrate --data table.csv [--out poly.json]
//   habs step --u0 0 --u1 1 [--duration 60] [--ts 0.1] [--preset canonical] [--out step.csv]
//   habs identify step_0_1.csv step_1_2.csv step_2_3.csv [--out model.json]
//   habs simulate --scenario ladder.json [--out log.csv]
//   habs serve [--port 8765] [--scenario live.json]
//
// Outputs without an explicit --out go to $HABS_LOG_DIR (or the working
// directory when unset).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "habs/calib.hpp"
#include "habs/error.hpp"
#include "habs/io.hpp"
#include "habs/live.hpp"
#include "habs/sim.hpp"
#include "habs/sysid.hpp"

namespace fs = std::filesystem;
using habs::io::json;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

fs::path output_path(const std::string& requested, const std::string& fallback_name) {
  if (!requested.empty()) return requested;
  const char* dir = std::getenv("HABS_LOG_DIR");
  fs::path base = dir && *dir ? fs::path(dir) : fs::current_path();
  fs::create_directories(base);
  return base / fallback_name;
}

habs::CalibrationPoly load_calibration(const std::string& path) {
  if (path.empty()) return habs::CalibrationPoly::pt326();
  return habs::io::poly_from_json(habs::io::read_json_file(path));
}

int cmd_calibrate(const std::string& data, const std::string& out) {
  const auto points = habs::io::read_calibration_points(fs::path(data));
  const auto poly = habs::fit_cubic(points);
  const auto res = habs::residuals(poly, points);

  std::cout << fmt::format("{:>10} {:>10} {:>10} {:>10}\n", "T", "V", "T_fit", "residual");
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::cout << fmt::format("{:>10.4f} {:>10.4f} {:>10.4f} {:>+10.4f}\n", points[i].temperature,
                             points[i].voltage, points[i].temperature + res[i], res[i]);
  }
  std::cout << fmt::format("rms residual: {:.4f} C\n", habs::rms_residual(poly, points));

  const auto path = output_path(out, "calibration.json");
  habs::io::write_text_file(path, habs::io::to_json(poly).dump(2) + "\n");
  std::cout << "poly written to " << path.string() << "\n";
  return 0;
}

int cmd_step(double u0, double u1, double duration, double ts, const std::string& preset,
             const std::string& plant_path, const std::string& out) {
  auto plant = habs::PlantConfig::preset(preset);
  if (!plant_path.empty()) {
    plant = habs::io::plant_config_from_json(habs::io::read_json_file(plant_path), plant);
  }
  const auto rec = habs::run_open_loop_step(u0, u1, duration, ts, plant);
  const auto path = output_path(out, fmt::format("step_{}_{}.csv", u0, u1));
  std::ostringstream csv;
  habs::io::write_step_record(csv, rec);
  habs::io::write_text_file(path, csv.str());
  std::cout << fmt::format("{} samples, step at t={} s, written to {}\n", rec.samples.size(),
                           rec.t_step, path.string());
  if (!rec.identifiable()) std::cout << "warning: u0 == u1, record is not identifiable\n";
  return 0;
}

int cmd_identify(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<habs::StepRecord> recs;
  for (const auto& in : inputs) recs.push_back(habs::io::read_step_record(fs::path(in)));
  const auto model = habs::identify_regions(recs);
  const auto doc = habs::io::to_json(model).dump(2) + "\n";
  std::cout << doc;
  if (!out.empty()) habs::io::write_text_file(out, doc);
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out,
                 const std::string& calib_path) {
  const auto scenario = habs::io::scenario_from_json(habs::io::read_json_file(scenario_path));
  const auto log = habs::run_closed_loop(scenario, load_calibration(calib_path));

  const auto path = output_path(out, fs::path(scenario_path).stem().string() + ".csv");
  habs::io::write_text_file(path, habs::io::sim_log_csv(log));

  json summary = {{"log", path.string()},
                  {"ticks", log.rows.size()},
                  {"switch_count", log.switch_count},
                  {"steps", json::array()}};
  for (const auto& step : log.steps) {
    json s = {{"t", step.t_start}, {"from", step.from_temp}, {"setpoint", step.setpoint}};
    if (step.metrics) {
      s["metrics"] = habs::io::to_json(*step.metrics);
      s["meets_objectives"] = step.metrics->rise_time < 4.0 && step.metrics->overshoot < 10.0;
    } else {
      s["failure"] = step.failure;
    }
    summary["steps"].push_back(s);
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_serve(const std::string& scenario_path, const std::string& bind, std::uint16_t port,
              double speed, const std::string& calib_path) {
  habs::Scenario scenario;
  scenario.duration = 3600.0;
  if (!scenario_path.empty()) {
    scenario = habs::io::scenario_from_json(habs::io::read_json_file(scenario_path));
  }
  habs::live::ServerOptions opts;
  opts.bind_address = bind;
  opts.port = port;
  opts.speed = speed;
  habs::live::LiveServer server(std::move(scenario), load_calibration(calib_path), opts);
  server.start();
  std::cout << "listening on " << bind << ":" << server.port() << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual PT326 hot-air blower process trainer"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error");

  std::string data, out, calib_path, scenario_path, preset = "canonical", plant_path;
  std::string bind = "127.0.0.1";
  double u0 = 0.0, u1 = 0.0, duration = 60.0, ts = 0.1, speed = 1.0;
  std::uint16_t port = 8765;
  std::vector<std::string> inputs;

  auto* calibrate = app.add_subcommand("calibrate", "fit a cubic calibration to T,V points");
  calibrate->add_option("--data", data, "calibration CSV (header T,V)")->required();
  calibrate->add_option("--out", out, "poly document to write");

  auto* step = app.add_subcommand("step", "record an open-loop step response");
  step->add_option("--u0", u0, "initial DAQ input (V)")->required();
  step->add_option("--u1", u1, "final DAQ input (V)")->required();
  step->add_option("--duration", duration, "seconds recorded after the step");
  step->add_option("--ts", ts, "sampling period (s)");
  step->add_option("--preset", preset, "plant preset: canonical|empirical");
  step->add_option("--plant", plant_path, "plant config document overriding the preset");
  step->add_option("--out", out, "step record CSV to write");

  auto* identify = app.add_subcommand("identify", "estimate the regional model from step records");
  identify->add_option("records", inputs, "step record CSV files")->required();
  identify->add_option("--out", out, "also write the model document here");

  auto* simulate = app.add_subcommand("simulate", "run a closed-loop scenario");
  simulate->add_option("--scenario", scenario_path, "scenario document")->required();
  simulate->add_option("--out", out, "log CSV to write");
  simulate->add_option("--calib", calib_path, "calibration poly document");

  auto* serve = app.add_subcommand("serve", "run the live trainer service");
  serve->add_option("--scenario", scenario_path, "scenario document");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--bind", bind, "bind address");
  serve->add_option("--speed", speed, "simulated seconds per wall second");
  serve->add_option("--calib", calib_path, "calibration poly document");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("habs"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*calibrate) return cmd_calibrate(data, out);
    if (*step) return cmd_step(u0, u1, duration, ts, preset, plant_path, out);
    if (*identify) return cmd_identify(inputs, out);
    if (*simulate) return cmd_simulate(scenario_path, out, calib_path);
    if (*serve) return cmd_serve(scenario_path, bind, port, speed, calib_path);
  } catch (const habs::Error& e) {
    std::cerr << "error: " << e.what() << " (" << habs::to_string(e.code()) << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
