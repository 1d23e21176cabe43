#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eqforge {

enum class ErrorCode {
  invalid_config,
  precondition,
  oracle_spawn,
  oracle_unavailable,
  oracle_timeout,
  oracle_malformed,
  oracle_out_of_range,
  oracle_remote,
  budget_exceeded,
  advisor_spawn,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::oracle_spawn: return "oracle-spawn";
    case ErrorCode::oracle_unavailable: return "oracle-unavailable";
    case ErrorCode::oracle_timeout: return "oracle-timeout";
    case ErrorCode::oracle_malformed: return "oracle-malformed";
    case ErrorCode::oracle_out_of_range: return "oracle-out-of-range";
    case ErrorCode::oracle_remote: return "oracle-remote";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::advisor_spawn: return "advisor-spawn";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Domain error carrying a stable code. The message is prefixed with the code
/// name so diagnostics stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same code, message prefixed with where it happened.
  Error with_context(const std::string& context) const {
    return Error(code_, context + ": " + detail_);
  }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline bool is_oracle_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::oracle_spawn:
    case ErrorCode::oracle_unavailable:
    case ErrorCode::oracle_timeout:
    case ErrorCode::oracle_malformed:
    case ErrorCode::oracle_out_of_range:
    case ErrorCode::oracle_remote:
      return true;
    default:
      return false;
  }
}

}  // namespace eqforge
