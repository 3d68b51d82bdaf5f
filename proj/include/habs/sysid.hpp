#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace habs {

/// One open-loop step experiment, uniformly sampled from t = 0.
/// samples[i] is the temperature at t = i·ts; the input switched from u0 to
/// u1 at t_step.
struct StepRecord {
  double ts = 0.1;
  double u0 = 0.0;
  double u1 = 0.0;
  std::vector<double> samples;
  double t_step = 0.0;

  bool identifiable() const noexcept { return u1 != u0; }
};

struct FirstOrderModel {
  double gain = 0.0;  // °C per DAQ volt
  double tau = 0.0;   // s
};

struct RegionInterval {
  double u_low = 0.0;
  double u_high = std::numeric_limits<double>::infinity();
  FirstOrderModel model;
};

/// Ordered intervals partitioning [0, ∞).
struct RegionalModel {
  std::vector<RegionInterval> regions;

  const RegionInterval& region_for(double u) const;
};

/// Tuning knobs of the step-response estimator. Defaults are the documented
/// method; tests rarely need to touch them.
struct EstimatorOptions {
  double tail_fraction = 0.10;     // final window averaged for the steady state
  double settle_tolerance = 0.02;  // allowed tail spread relative to excursion
  double crossing_level = 0.632;   // time-constant crossing
  bool extrapolate_tail = true;    // geometric tail correction of y_ss
};

/// Gain from endpoint averages, time constant from the interpolated 63.2 %
/// crossing after t_step. Throws ZeroInputStep, NotSettled or
/// NonMonotoneOnset.
FirstOrderModel estimate_first_order(const StepRecord& rec, const EstimatorOptions& opts = {});

/// One model per record, records ordered by input segment; the first interval
/// is extended down to 0 and the last up to infinity.
/// Throws NonContiguousSegments (also for an empty list) and propagates
/// estimate errors.
RegionalModel identify_regions(std::span<const StepRecord> recs, const EstimatorOptions& opts = {});

}  // namespace habs
