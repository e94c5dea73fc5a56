#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

enum class PowerMode { sleep, idle, active };

constexpr std::string_view to_string(PowerMode m) {
  switch (m) {
    case PowerMode::sleep: return "sleep";
    case PowerMode::idle: return "idle";
    case PowerMode::active: return "active";
  }
  return "?";
}

constexpr std::optional<PowerMode> power_mode_from_string(std::string_view s) {
  if (s == "sleep") return PowerMode::sleep;
  if (s == "idle") return PowerMode::idle;
  if (s == "active") return PowerMode::active;
  return std::nullopt;
}

/// Measured draw of the LoRa unit at 3.3 V: 180 uA asleep, 9.0 mA idle, 75 mA transmitting.
struct ModePowers {
  double sleep_mw = 0.594;
  double idle_mw = 29.7;
  double active_mw = 247.5;

  double draw_mw(PowerMode m) const {
    switch (m) {
      case PowerMode::sleep: return sleep_mw;
      case PowerMode::idle: return idle_mw;
      case PowerMode::active: return active_mw;
    }
    return 0.0;
  }
};

/// Default timing of one report event: wake-up to first transmission, then the transmission window.
inline constexpr Duration kDefaultIdleWindow = 1s;
inline constexpr Duration kDefaultActiveWindow = 12s;

struct EnergySegment {
  PowerMode mode;
  SimTime start;
  SimTime end;
};

/// Time-integrated energy of one node. mW x s = mJ.
class EnergyLedger {
 public:
  EnergyLedger(NodeAddress node, PowerMode initial, SimTime start, ModePowers powers = {})
      : node_(node), powers_(powers), open_mode_(initial), open_start_(start) {}

  /// Closes the open segment at `at` and opens one in `mode`.
  void record_transition(PowerMode mode, SimTime at) {
    close_open(at);
    open_mode_ = mode;
    open_start_ = at;
  }

  /// Closes the open segment without opening another. Further transitions are rejected.
  void finish(SimTime at) {
    close_open(at);
    finished_ = true;
  }

  NodeAddress node() const { return node_; }
  const ModePowers& powers() const { return powers_; }
  const std::vector<EnergySegment>& segments() const { return segments_; }
  PowerMode current_mode() const { return open_mode_; }
  bool finished() const { return finished_; }

  /// Energy of the closed segments.
  double total_mj() const { return total_mj_; }

  /// Closed energy plus the open segment's accrual up to `at`.
  double total_mj_at(SimTime at) const {
    if (finished_ || at <= open_start_) return total_mj_;
    return total_mj_ + powers_.draw_mw(open_mode_) * to_seconds(at - open_start_);
  }

 private:
  void close_open(SimTime at) {
    if (finished_) throw Error(Errc::time_regression, "ledger already finished");
    if (at < open_start_)
      throw Error(Errc::time_regression, "transition at " + format_seconds(at) +
                                             " precedes segment start " +
                                             format_seconds(open_start_));
    segments_.push_back({open_mode_, open_start_, at});
    total_mj_ += powers_.draw_mw(open_mode_) * to_seconds(at - open_start_);
  }

  NodeAddress node_;
  ModePowers powers_;
  std::vector<EnergySegment> segments_;
  PowerMode open_mode_;
  SimTime open_start_;
  double total_mj_ = 0.0;
  bool finished_ = false;
};

/// Energy of one report event: `idle_s` in idle mode followed by `active_s` transmitting.
inline double event_energy(double idle_s, double active_s, const ModePowers& powers = {}) {
  return idle_s * powers.idle_mw + active_s * powers.active_mw;
}

struct BatterySpec {
  double capacity_mah = 1000.0;
  double voltage_v = 3.7;
  double usable_fraction = 0.85;

  double energy_j() const { return capacity_mah * 3.6 * voltage_v * usable_fraction; }

  void validate() const {
    if (!(capacity_mah > 0) || !(voltage_v > 0))
      throw Error(Errc::invalid_scenario, "battery capacity and voltage must be positive");
    if (!(usable_fraction > 0 && usable_fraction <= 1))
      throw Error(Errc::invalid_scenario, "usable fraction must lie in (0,1]");
  }
};

inline double estimate_lifetime_days(const BatterySpec& battery, double events_per_day,
                                     double event_energy_mj, double sleep_draw_mw) {
  battery.validate();
  const double joules_per_day =
      sleep_draw_mw / 1000.0 * 86400.0 + events_per_day * event_energy_mj / 1000.0;
  return battery.energy_j() / joules_per_day;
}

}  // namespace sparclora
