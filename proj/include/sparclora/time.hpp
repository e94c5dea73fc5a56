#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

namespace sparclora {

/// Virtual time: a 64-bit count of microseconds since the start of a run.
using Duration = std::chrono::duration<std::int64_t, std::micro>;
using SimTime = Duration;

using namespace std::chrono_literals;

constexpr double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1e6; }

inline Duration from_seconds(double seconds) {
  return Duration{static_cast<std::int64_t>(std::llround(seconds * 1e6))};
}

/// Renders as seconds with exactly six decimals, without going through floating point.
inline std::string format_seconds(Duration d) {
  std::int64_t us = d.count();
  const bool negative = us < 0;
  if (negative) us = -us;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", negative ? "-" : "",
                static_cast<long long>(us / 1'000'000), static_cast<long long>(us % 1'000'000));
  return buf;
}

}  // namespace sparclora
