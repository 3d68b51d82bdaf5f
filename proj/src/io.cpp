#include "habs/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "habs/error.hpp"

namespace habs::io {

namespace {

constexpr double kJitterTol = 1e-9;

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, fmt::format("line {}: {}", line, what));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(cell, &used);
  } catch (const std::exception&) {
    parse_fail(line, fmt::format("'{}' is not a number", cell));
  }
  if (used != cell.size() || !std::isfinite(value)) {
    parse_fail(line, fmt::format("'{}' is not a finite number", cell));
  }
  return value;
}

// Reads a header-checked numeric CSV into rows of `columns` values.
std::vector<std::vector<double>> read_numeric_csv(std::istream& in, const std::string& header,
                                                  std::size_t columns) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!seen_header) {
      std::string compact;
      for (char c : text) {
        if (c != ' ' && c != '\t') compact += c;
      }
      if (compact != header) parse_fail(line_no, fmt::format("expected header '{}'", header));
      seen_header = true;
      continue;
    }
    const auto cells = split_csv(text);
    if (cells.size() != columns) {
      parse_fail(line_no, fmt::format("expected {} columns, got {}", columns, cells.size()));
    }
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(parse_number(cell, line_no));
    rows.push_back(std::move(row));
  }
  if (!seen_header) parse_fail(line_no, fmt::format("missing header '{}'", header));
  return rows;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::string fmt_num(double v) { return fmt::format("{:.12g}", v); }

json bound_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

double bound_from_json(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

void reject_unknown_keys(const json& doc, std::initializer_list<const char*> allowed,
                         const char* what) {
  if (!doc.is_object()) throw Error(Errc::ParseError, fmt::format("{} must be an object", what));
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : doc.items()) {
    if (!keys.contains(key)) {
      throw Error(Errc::ParseError, fmt::format("unknown key '{}' in {}", key, what));
    }
  }
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, fmt::format("malformed {}: {}", what, e.what()));
  }
}

std::vector<SchedulePoint> schedule_from_json(const json& doc, const char* what) {
  std::vector<SchedulePoint> out;
  if (!doc.is_array()) throw Error(Errc::ParseError, fmt::format("{} must be an array", what));
  for (const auto& entry : doc) {
    if (!entry.is_array() || entry.size() != 2) {
      throw Error(Errc::ParseError, fmt::format("{} entries must be [t, value] pairs", what));
    }
    out.push_back({entry[0].get<double>(), entry[1].get<double>()});
  }
  return out;
}

json schedule_to_json(const std::vector<SchedulePoint>& schedule) {
  json out = json::array();
  for (const auto& p : schedule) out.push_back({p.t, p.value});
  return out;
}

}  // namespace

std::vector<CalibrationPoint> read_calibration_points(std::istream& in) {
  std::vector<CalibrationPoint> points;
  for (const auto& row : read_numeric_csv(in, "T,V", 2)) points.push_back({row[0], row[1]});
  return points;
}

std::vector<CalibrationPoint> read_calibration_points(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_calibration_points(in);
}

void write_calibration_points(std::ostream& out, const std::vector<CalibrationPoint>& points) {
  out << "T,V\n";
  for (const auto& p : points) out << fmt_num(p.temperature) << ',' << fmt_num(p.voltage) << '\n';
}

StepRecord read_step_record(std::istream& in) {
  const auto rows = read_numeric_csv(in, "t,u,T", 3);
  if (rows.size() < 2) throw Error(Errc::ParseError, "step record needs at least two samples");

  StepRecord rec;
  const double t0 = rows[0][0];
  rec.ts = rows[1][0] - t0;
  if (!(rec.ts > 0.0)) throw Error(Errc::ParseError, "step record time must increase");
  rec.u0 = rows[0][1];
  rec.u1 = rows.back()[1];
  bool stepped = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && std::abs((rows[i][0] - rows[i - 1][0]) - rec.ts) > kJitterTol) {
      parse_fail(i + 2, fmt::format("sampling interval {} deviates from {} by more than {} s",
                                    rows[i][0] - rows[i - 1][0], rec.ts, kJitterTol));
    }
    const double u = rows[i][1];
    if (!stepped && u != rec.u0) {
      stepped = true;
      rec.t_step = rows[i][0] - t0;
    }
    if ((stepped && u != rec.u1) || (!stepped && u != rec.u0)) {
      parse_fail(i + 2, "input changes more than once");
    }
    rec.samples.push_back(rows[i][2]);
  }
  return rec;
}

StepRecord read_step_record(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_step_record(in);
}

void write_step_record(std::ostream& out, const StepRecord& rec) {
  out << "t,u,T\n";
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const double t = static_cast<double>(i) * rec.ts;
    const double u = t < rec.t_step - 1e-9 ? rec.u0 : rec.u1;
    out << fmt_num(t) << ',' << fmt_num(u) << ',' << fmt_num(rec.samples[i]) << '\n';
  }
}

void write_sim_log(std::ostream& out, const SimLog& log) {
  out << kSimLogHeader << '\n';
  for (const auto& r : log.rows) {
    out << fmt_num(r.t) << ',' << fmt_num(r.setpoint) << ',' << fmt_num(r.temp_internal) << ','
        << fmt_num(r.temp_measured) << ',' << fmt_num(r.volts_measured) << ',' << fmt_num(r.error)
        << ',' << fmt_num(r.u_daq) << ',' << fmt_num(r.u_plant) << ',' << region_label(r.region)
        << '\n';
  }
}

std::string sim_log_csv(const SimLog& log) {
  std::ostringstream out;
  write_sim_log(out, log);
  return out.str();
}

json to_json(const CalibrationPoly& poly) {
  return {{"c3", poly.c3}, {"c2", poly.c2}, {"c1", poly.c1}, {"c0", poly.c0}};
}

CalibrationPoly poly_from_json(const json& doc) {
  return guarded("calibration document", [&] {
    reject_unknown_keys(doc, {"c3", "c2", "c1", "c0"}, "calibration document");
    return CalibrationPoly{doc.at("c3").get<double>(), doc.at("c2").get<double>(),
                           doc.at("c1").get<double>(), doc.at("c0").get<double>()};
  });
}

json to_json(const PlantConfig& cfg) {
  return {{"ambient_temp", cfg.ambient_temp},       {"region_gains", cfg.region_gains},
          {"region_taus", cfg.region_taus},         {"region_breaks", cfg.region_breaks},
          {"amp_gain", cfg.amp_gain},               {"sensor_delay_s", cfg.sensor_delay_s},
          {"throttle_factor", cfg.throttle_factor}, {"noise_sigma", cfg.noise_sigma},
          {"noise_seed", cfg.noise_seed}};
}

PlantConfig plant_config_from_json(const json& doc, PlantConfig base) {
  return guarded("plant config", [&] {
    reject_unknown_keys(doc,
                        {"preset", "ambient_temp", "region_gains", "region_taus", "region_breaks",
                         "amp_gain", "sensor_delay_s", "throttle_factor", "noise_sigma",
                         "noise_seed"},
                        "plant config");
    PlantConfig cfg = doc.contains("preset")
                          ? PlantConfig::preset(doc["preset"].get<std::string>())
                          : std::move(base);
    if (doc.contains("ambient_temp")) cfg.ambient_temp = doc["ambient_temp"].get<double>();
    if (doc.contains("region_gains")) cfg.region_gains = doc["region_gains"].get<std::vector<double>>();
    if (doc.contains("region_taus")) cfg.region_taus = doc["region_taus"].get<std::vector<double>>();
    if (doc.contains("region_breaks")) {
      cfg.region_breaks = doc["region_breaks"].get<std::vector<double>>();
    }
    if (doc.contains("amp_gain")) {
      cfg.amp_gain = doc["amp_gain"].get<double>();
      cfg.plant_in_range[1] = cfg.amp_gain * cfg.daq_out_range[1];
    }
    if (doc.contains("sensor_delay_s")) cfg.sensor_delay_s = doc["sensor_delay_s"].get<double>();
    if (doc.contains("throttle_factor")) cfg.throttle_factor = doc["throttle_factor"].get<double>();
    if (doc.contains("noise_sigma")) cfg.noise_sigma = doc["noise_sigma"].get<double>();
    if (doc.contains("noise_seed")) cfg.noise_seed = doc["noise_seed"].get<std::uint64_t>();
    cfg.validate();
    return cfg;
  });
}

json to_json(const ControllerConfig& cfg) {
  json regions = json::array();
  for (const auto& r : cfg.regions) {
    regions.push_back({{"u_low", r.u_low},
                       {"u_high", bound_to_json(r.u_high)},
                       {"kp", r.gains.kp},
                       {"ki", r.gains.ki}});
  }
  return {{"regions", regions},
          {"ts", cfg.ts},
          {"sat_low", cfg.sat_low},
          {"sat_high", cfg.sat_high},
          {"anti_windup", cfg.anti_windup}};
}

ControllerConfig controller_config_from_json(const json& doc, ControllerConfig base) {
  return guarded("controller document", [&] {
    reject_unknown_keys(doc, {"regions", "ts", "sat_low", "sat_high", "anti_windup"},
                        "controller document");
    ControllerConfig cfg = std::move(base);
    if (doc.contains("regions")) {
      cfg.regions.clear();
      for (const auto& r : doc["regions"]) {
        reject_unknown_keys(r, {"u_low", "u_high", "kp", "ki"}, "controller region");
        cfg.regions.push_back({r.at("u_low").get<double>(),
                               bound_from_json(r.contains("u_high") ? r["u_high"] : json(nullptr)),
                               {r.at("kp").get<double>(), r.at("ki").get<double>()}});
      }
    }
    if (doc.contains("ts")) cfg.ts = doc["ts"].get<double>();
    if (doc.contains("sat_low")) cfg.sat_low = doc["sat_low"].get<double>();
    if (doc.contains("sat_high")) cfg.sat_high = doc["sat_high"].get<double>();
    if (doc.contains("anti_windup")) cfg.anti_windup = doc["anti_windup"].get<bool>();
    cfg.validate();
    return cfg;
  });
}

json to_json(const Scenario& scn) {
  json doc = {{"duration", scn.duration},
              {"ts", scn.ts},
              {"setpoints", schedule_to_json(scn.setpoints)},
              {"throttle", schedule_to_json(scn.throttle)},
              {"plant_preset", scn.plant_preset},
              {"controller", to_json(scn.controller)},
              {"initial_temp", scn.initial_temp ? json(*scn.initial_temp) : json(nullptr)},
              {"seed", scn.seed},
              {"plant", to_json(scn.plant)}};
  doc["plant"].erase("noise_seed");
  return doc;
}

Scenario scenario_from_json(const json& doc) {
  return guarded("scenario", [&] {
    reject_unknown_keys(doc,
                        {"duration", "ts", "setpoints", "throttle", "plant_preset", "controller",
                         "initial_temp", "seed", "plant"},
                        "scenario");
    Scenario scn;
    scn.duration = doc.at("duration").get<double>();
    if (doc.contains("ts")) scn.ts = doc["ts"].get<double>();
    if (doc.contains("setpoints")) scn.setpoints = schedule_from_json(doc["setpoints"], "setpoints");
    if (doc.contains("throttle")) scn.throttle = schedule_from_json(doc["throttle"], "throttle");
    if (doc.contains("plant_preset")) scn.plant_preset = doc["plant_preset"].get<std::string>();
    scn.plant = PlantConfig::preset(scn.plant_preset);
    if (doc.contains("plant")) scn.plant = plant_config_from_json(doc["plant"], scn.plant);

    ControllerConfig base = ControllerConfig::standard();
    base.ts = scn.ts;
    scn.controller = doc.contains("controller")
                         ? controller_config_from_json(doc["controller"], base)
                         : base;
    if (doc.contains("initial_temp") && !doc["initial_temp"].is_null()) {
      scn.initial_temp = doc["initial_temp"].get<double>();
    }
    if (doc.contains("seed")) scn.seed = doc["seed"].get<std::uint64_t>();
    scn.validate();
    return scn;
  });
}

json to_json(const RegionalModel& model) {
  json regions = json::array();
  for (const auto& r : model.regions) {
    regions.push_back({{"u_low", r.u_low},
                       {"u_high", bound_to_json(r.u_high)},
                       {"gain", r.model.gain},
                       {"tau", r.model.tau}});
  }
  return {{"regions", regions}};
}

RegionalModel regional_model_from_json(const json& doc) {
  return guarded("regional model", [&] {
    reject_unknown_keys(doc, {"regions"}, "regional model");
    RegionalModel model;
    for (const auto& r : doc.at("regions")) {
      model.regions.push_back({r.at("u_low").get<double>(), bound_from_json(r.at("u_high")),
                               {r.at("gain").get<double>(), r.at("tau").get<double>()}});
    }
    return model;
  });
}

json to_json(const StepMetrics& m) {
  // JSON has no infinity; a step that never rises or settles reports null.
  return {{"rise_time", bound_to_json(m.rise_time)},
          {"overshoot", m.overshoot},
          {"settling_time", bound_to_json(m.settling_time)}};
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(Errc::IoError, fmt::format("failed writing '{}'", path.string()));
}

}  // namespace habs::io
