#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "habs/calib.hpp"
#include "habs/control.hpp"
#include "habs/plant.hpp"
#include "habs/sim.hpp"
#include "habs/sysid.hpp"

namespace habs::io {

using json = nlohmann::json;

// Text files. All readers throw Error(ParseError) with a line number on
// malformed content and Error(IoError) when the file cannot be opened.

/// `T,V` header, then one `temperature_c,voltage_v` row per point.
std::vector<CalibrationPoint> read_calibration_points(std::istream& in);
std::vector<CalibrationPoint> read_calibration_points(const std::filesystem::path& path);
void write_calibration_points(std::ostream& out, const std::vector<CalibrationPoint>& points);

/// `t,u,T` header. The sampling period is inferred from the first two rows
/// and every later interval must match it within 1e-9 s; the input may
/// change at most once.
StepRecord read_step_record(std::istream& in);
StepRecord read_step_record(const std::filesystem::path& path);
void write_step_record(std::ostream& out, const StepRecord& rec);

/// Exact header `t,setpoint,T_internal,T_measured,V_measured,e,u_daq,u_plant,region`.
inline constexpr const char* kSimLogHeader =
    "t,setpoint,T_internal,T_measured,V_measured,e,u_daq,u_plant,region";
void write_sim_log(std::ostream& out, const SimLog& log);
std::string sim_log_csv(const SimLog& log);

// Structured documents.

json to_json(const CalibrationPoly& poly);
CalibrationPoly poly_from_json(const json& doc);

json to_json(const PlantConfig& cfg);
/// Keys override the named base preset (canonical when absent).
PlantConfig plant_config_from_json(const json& doc, PlantConfig base = PlantConfig::canonical());

/// `{regions: [{u_low, u_high, kp, ki}], ts, sat_low, sat_high, anti_windup}`,
/// u_high null for the unbounded last region.
json to_json(const ControllerConfig& cfg);
ControllerConfig controller_config_from_json(const json& doc,
                                             ControllerConfig base = ControllerConfig::standard());

json to_json(const Scenario& scn);
Scenario scenario_from_json(const json& doc);

json to_json(const RegionalModel& model);
RegionalModel regional_model_from_json(const json& doc);

json to_json(const StepMetrics& m);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace habs::io
