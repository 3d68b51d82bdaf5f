#include "habs/calib.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kBracket = 50.0;
constexpr double kBisectionWidth = 1e-12;

}  // namespace

double eval_poly(const CalibrationPoly& poly, double voltage) noexcept {
  return ((poly.c3 * voltage + poly.c2) * voltage + poly.c1) * voltage + poly.c0;
}

double eval_derivative(const CalibrationPoly& poly, double voltage) noexcept {
  return (3.0 * poly.c3 * voltage + 2.0 * poly.c2) * voltage + poly.c1;
}

bool is_strictly_increasing(const CalibrationPoly& poly) noexcept {
  if (poly.c3 == 0.0) {
    return poly.c2 == 0.0 && poly.c1 > 0.0;
  }
  const double a = 3.0 * poly.c3;
  const double b = 2.0 * poly.c2;
  return a > 0.0 && b * b - 4.0 * a * poly.c1 < 0.0;
}

CalibrationPoly fit_cubic(std::span<const CalibrationPoint> points) {
  if (points.size() < 4) {
    throw Error(Errc::FewerThanFourPoints,
                fmt::format("need >=4 points, got {}", points.size()));
  }

  std::vector<double> volts;
  volts.reserve(points.size());
  for (const auto& p : points) volts.push_back(p.voltage);
  std::sort(volts.begin(), volts.end());
  const double lo = volts.front();
  const double hi = volts.back();
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < volts.size(); ++i) {
    if (volts[i] - volts[i - 1] > tol) ++distinct;
  }
  if (distinct < 4) {
    throw Error(Errc::DegenerateVoltages,
                fmt::format("need >=4 distinct voltages, got {}", distinct));
  }

  // x = (V - centre) / half_range keeps the Vandermonde columns O(1).
  const double centre = 0.5 * (lo + hi);
  const double half_range = 0.5 * (hi - lo);

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (points[static_cast<std::size_t>(i)].voltage - centre) / half_range;
    a(i, 0) = 1.0;
    a(i, 1) = x;
    a(i, 2) = x * x;
    a(i, 3) = x * x * x;
    y(i) = points[static_cast<std::size_t>(i)].temperature;
  }
  const Eigen::Matrix4d normal = a.transpose() * a;
  const Eigen::Vector4d rhs = a.transpose() * y;
  const Eigen::LDLT<Eigen::Matrix4d> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(Errc::DegenerateVoltages, "calibration normal equations are singular");
  }
  const Eigen::Vector4d s = ldlt.solve(rhs);

  // Expand sum_k s_k ((V - c)/h)^k back into powers of V.
  const double c = centre;
  const double h = half_range;
  const double b1 = s(1) / h;
  const double b2 = s(2) / (h * h);
  const double b3 = s(3) / (h * h * h);
  CalibrationPoly poly;
  poly.c3 = b3;
  poly.c2 = b2 - 3.0 * b3 * c;
  poly.c1 = b1 - 2.0 * b2 * c + 3.0 * b3 * c * c;
  poly.c0 = s(0) - b1 * c + b2 * c * c - b3 * c * c * c;
  return poly;
}

double invert_poly(const CalibrationPoly& poly, double temperature) {
  if (!is_strictly_increasing(poly)) {
    throw Error(Errc::NonMonotonePoly, "calibration polynomial is not strictly increasing");
  }
  if (!std::isfinite(temperature)) {
    throw Error(Errc::InputOutOfRange, "cannot invert a non-finite temperature");
  }

  double lo = -kBracket;
  double hi = kBracket;
  // The cubic is onto, so widening always terminates.
  while (eval_poly(poly, lo) > temperature) lo *= 2.0;
  while (eval_poly(poly, hi) < temperature) hi *= 2.0;

  while (hi - lo > kBisectionWidth) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eval_poly(poly, mid) < temperature) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double v = 0.5 * (lo + hi);
  v -= (eval_poly(poly, v) - temperature) / eval_derivative(poly, v);

  if (v < kNominalVoltageLow || v > kNominalVoltageHigh) {
    spdlog::debug("calibration extrapolated: T={:.4f} C -> V={:.4f} outside [{}, {}]", temperature,
                  v, kNominalVoltageLow, kNominalVoltageHigh);
  }
  return v;
}

std::vector<double> residuals(const CalibrationPoly& poly, std::span<const CalibrationPoint> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(eval_poly(poly, p.voltage) - p.temperature);
  return out;
}

double rms_residual(const CalibrationPoly& poly, std::span<const CalibrationPoint> points) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (double r : residuals(poly, points)) sum += r * r;
  return std::sqrt(sum / static_cast<double>(points.size()));
}

}  // namespace habs
