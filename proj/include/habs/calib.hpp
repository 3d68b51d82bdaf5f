#pragma once

#include <span>
#include <vector>

namespace habs {

/// Cubic map from measured sensor voltage (V) to air temperature (°C):
/// T = c3·V³ + c2·V² + c1·V + c0.
struct CalibrationPoly {
  double c3 = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  /// Calibration of the PT326 thermistor chain as used on the rig.
  static constexpr CalibrationPoly pt326() { return {0.072, -0.3033, 2.2459, 38.1792}; }

  bool operator==(const CalibrationPoly&) const = default;
};

struct CalibrationPoint {
  double temperature = 0.0;  // °C
  double voltage = 0.0;      // V
};

/// Voltage interval inside which the calibration is backed by data.
/// Evaluation outside it is allowed but logged.
inline constexpr double kNominalVoltageLow = -4.0;
inline constexpr double kNominalVoltageHigh = 9.0;

double eval_poly(const CalibrationPoly& poly, double voltage) noexcept;

/// dT/dV.
double eval_derivative(const CalibrationPoly& poly, double voltage) noexcept;

/// True when dT/dV > 0 on the whole real line: positive leading coefficient
/// and a derivative with negative discriminant (or a plain positive slope).
bool is_strictly_increasing(const CalibrationPoly& poly) noexcept;

/// Least-squares cubic through the points. Abscissae are centred and scaled
/// by the voltage range before forming the normal equations.
/// Throws FewerThanFourPoints or DegenerateVoltages.
CalibrationPoly fit_cubic(std::span<const CalibrationPoint> points);

/// Unique voltage v with eval_poly(poly, v) == temperature.
/// Throws NonMonotonePoly when the poly is not globally increasing.
double invert_poly(const CalibrationPoly& poly, double temperature);

/// Signed residuals poly(V_i) − T_i.
std::vector<double> residuals(const CalibrationPoly& poly, std::span<const CalibrationPoint> points);

double rms_residual(const CalibrationPoly& poly, std::span<const CalibrationPoint> points);

}  // namespace habs
