#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sparclora {

enum class Errc {
  invalid_flags,
  payload_too_long,
  too_short,
  reserved_address,
  invalid_payload,
  time_regression,
  timestamp_regression,
  invalid_record,
  parse_error,
  invalid_scenario,
  missing_artifact,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_flags: return "invalid-flags";
    case Errc::payload_too_long: return "payload-too-long";
    case Errc::too_short: return "too-short";
    case Errc::reserved_address: return "reserved-address";
    case Errc::invalid_payload: return "invalid-payload";
    case Errc::time_regression: return "time-regression";
    case Errc::timestamp_regression: return "timestamp-regression";
    case Errc::invalid_record: return "invalid-record";
    case Errc::parse_error: return "parse-error";
    case Errc::invalid_scenario: return "invalid-scenario";
    case Errc::missing_artifact: return "missing-artifact";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sparclora
