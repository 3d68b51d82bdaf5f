#include "habs/error.hpp"

namespace habs {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::FewerThanFourPoints: return "FewerThanFourPoints";
    case Errc::DegenerateVoltages: return "DegenerateVoltages";
    case Errc::NonMonotonePoly: return "NonMonotonePoly";
    case Errc::InputOutOfRange: return "InputOutOfRange";
    case Errc::NonPositiveTimestep: return "NonPositiveTimestep";
    case Errc::NonPositiveFactor: return "NonPositiveFactor";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ZeroInputStep: return "ZeroInputStep";
    case Errc::NotSettled: return "NotSettled";
    case Errc::NonMonotoneOnset: return "NonMonotoneOnset";
    case Errc::NonContiguousSegments: return "NonContiguousSegments";
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::ZeroAmplitude: return "ZeroAmplitude";
    case Errc::NeverRises: return "NeverRises";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace habs
