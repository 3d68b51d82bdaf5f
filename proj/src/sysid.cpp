#include "habs/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "habs/error.hpp"

namespace habs {

namespace {

constexpr double kSegmentTol = 1e-9;

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Steady state of a first-order tail from three consecutive window means.
// Window means of y_ss - A·exp(-t/tau) form a geometric sequence around y_ss,
// so Aitken's delta-squared step recovers y_ss exactly for noise-free data.
// Falls back to the plain last-window mean when the tail is flat or not a
// clean decay.
double extrapolated_steady_state(std::span<const double> samples, std::size_t window,
                                 double excursion_hint) {
  const std::size_t n = samples.size();
  const double last = mean(samples.subspan(n - window, window));
  if (3 * window > n) return last;
  const double mid = mean(samples.subspan(n - 2 * window, window));
  const double first = mean(samples.subspan(n - 3 * window, window));
  const double d1 = mid - first;
  const double d2 = last - mid;
  if (std::abs(d1) <= 1e-9 * std::abs(excursion_hint)) return last;
  const double ratio = d2 / d1;
  if (!(ratio > 0.0 && ratio < 0.95)) return last;
  return last + d2 * ratio / (1.0 - ratio);
}

}  // namespace

const RegionInterval& RegionalModel::region_for(double u) const {
  for (const auto& r : regions) {
    if (u >= r.u_low && u < r.u_high) return r;
  }
  throw Error(Errc::InputOutOfRange, fmt::format("no region covers u = {}", u));
}

FirstOrderModel estimate_first_order(const StepRecord& rec, const EstimatorOptions& opts) {
  if (rec.u1 == rec.u0) {
    throw Error(Errc::ZeroInputStep, "step record has u0 == u1");
  }
  if (!(rec.ts > 0.0)) {
    throw Error(Errc::NonPositiveTimestep, "step record timestep must be > 0");
  }
  if (rec.samples.empty()) {
    throw Error(Errc::NotSettled, "step record has no samples");
  }
  const std::span<const double> y(rec.samples);
  const std::size_t n = y.size();

  // Samples strictly before the step; the first sample if the step is at t=0.
  std::size_t step_index = 0;
  while (step_index < n && static_cast<double>(step_index) * rec.ts < rec.t_step - 1e-9) {
    ++step_index;
  }
  const double y0 = mean(y.subspan(0, std::max<std::size_t>(step_index, 1)));

  const std::size_t window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(opts.tail_fraction * static_cast<double>(n))));
  const auto tail = y.subspan(n - window, window);
  const double tail_mean = mean(tail);
  const auto [tail_min, tail_max] = std::minmax_element(tail.begin(), tail.end());
  const double excursion = tail_mean - y0;
  if (!(*tail_max - *tail_min < opts.settle_tolerance * std::abs(excursion))) {
    throw Error(Errc::NotSettled,
                fmt::format("final {:.0f}% of record varies by {:.4g}, more than {:.0f}% of the "
                            "excursion {:.4g}",
                            opts.tail_fraction * 100.0, *tail_max - *tail_min,
                            opts.settle_tolerance * 100.0, excursion));
  }
  const std::size_t post_step = n - step_index;
  const double y_ss = opts.extrapolate_tail && 3 * window <= post_step
                          ? extrapolated_steady_state(y, window, excursion)
                          : tail_mean;

  const double span = y_ss - y0;
  const double level = opts.crossing_level;
  for (std::size_t i = std::max<std::size_t>(step_index, 1); i < n; ++i) {
    const double prev = (y[i - 1] - y0) / span;
    const double cur = (y[i] - y0) / span;
    if (cur >= level) {
      const double t_prev = static_cast<double>(i - 1) * rec.ts;
      const double frac = cur == prev ? 0.0 : (level - prev) / (cur - prev);
      const double t_cross = t_prev + std::clamp(frac, 0.0, 1.0) * rec.ts;
      const double tau = t_cross - rec.t_step;
      if (!(tau > 0.0)) break;
      return {span / (rec.u1 - rec.u0), tau};
    }
  }
  throw Error(Errc::NonMonotoneOnset,
              fmt::format("response never crosses {:.1f}% of its excursion after the step",
                          level * 100.0));
}

RegionalModel identify_regions(std::span<const StepRecord> recs, const EstimatorOptions& opts) {
  if (recs.empty()) {
    throw Error(Errc::NonContiguousSegments, "no step records to identify from");
  }
  std::vector<const StepRecord*> ordered;
  for (const auto& r : recs) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const StepRecord* a, const StepRecord* b) {
    return std::min(a->u0, a->u1) < std::min(b->u0, b->u1);
  });

  for (std::size_t i = 1; i < ordered.size(); ++i) {
    const double prev_high = std::max(ordered[i - 1]->u0, ordered[i - 1]->u1);
    const double low = std::min(ordered[i]->u0, ordered[i]->u1);
    if (std::abs(low - prev_high) > kSegmentTol) {
      throw Error(Errc::NonContiguousSegments,
                  fmt::format("segment starting at u={} does not continue the previous one ending "
                              "at u={}",
                              low, prev_high));
    }
  }

  RegionalModel model;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    RegionInterval interval;
    interval.u_low = i == 0 ? 0.0 : std::max(ordered[i - 1]->u0, ordered[i - 1]->u1);
    interval.u_high = i + 1 == ordered.size() ? std::numeric_limits<double>::infinity()
                                              : std::max(ordered[i]->u0, ordered[i]->u1);
    interval.model = estimate_first_order(*ordered[i], opts);
    model.regions.push_back(interval);
  }
  return model;
}

}  // namespace habs
