#include "minbo/error.hpp"

#include <iostream>
#include <mutex>

namespace minbo {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::HullViolation: return "HullViolation";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateIIB: return "DegenerateIIB";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnbalancedLongitudinal: return "UnbalancedLongitudinal";
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) {
    std::cerr << "minbo: warning: " << msg << '\n';
  };
  return s;
}

}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

}  // namespace minbo
