#pragma once

#include <stdexcept>
#include <string>

namespace habs {

enum class Errc {
  FewerThanFourPoints,
  DegenerateVoltages,
  NonMonotonePoly,
  InputOutOfRange,
  NonPositiveTimestep,
  NonPositiveFactor,
  InvalidConfig,
  ZeroInputStep,
  NotSettled,
  NonMonotoneOnset,
  NonContiguousSegments,
  NegativeInput,
  ZeroAmplitude,
  NeverRises,
  ParseError,
  IoError,
};

const char* to_string(Errc code) noexcept;

// Every failure surfaced by the library carries one of the codes above so
// callers (tests, the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace habs
