#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace minbo {

enum class ErrorCode {
  InvalidArgument,
  OutOfRange,
  DimensionMismatch,
  NotPositiveDefinite,
  HullViolation,
  NotConverged,
  RankDeficient,
  InvalidWeights,
  LengthMismatch,
  DegenerateIIB,
  Separation,
  NonPositiveVariance,
  TooManyFailures,
  ParseError,
  IoError,
  UnbalancedLongitudinal,
  UnknownSubject,
  ConfigError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal diagnostics (degenerate IIB fallback, all-zero constraint rows,
// reps=1 summaries). The default sink writes to stderr.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace minbo
