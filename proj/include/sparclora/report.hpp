#pragma once

// Run metrics (derived from a trace alone, plus the scenario for roles and cells),
// their metrics.txt form, and the FLR and power reports built from them.

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "sparclora/channel.hpp"
#include "sparclora/error.hpp"
#include "sparclora/power.hpp"
#include "sparclora/scenario.hpp"
#include "sparclora/trace.hpp"

namespace sparclora {

struct NodeMetrics {
  NodeAddress address;
  Role role = Role::sensor;
  std::size_t queued = 0;
  std::size_t sent = 0;       // data frames put on air (gateway/relay: all frames)
  std::size_t retried = 0;    // data copies beyond the first of a payload
  std::size_t delivered = 0;  // payloads published at the sink
  std::size_t succeeded = 0;  // end-to-end successes as counted for FLR
  std::size_t collided = 0;   // copies of this node's frames lost to collisions
  double energy_mj = 0.0;
  double lifetime_days = 0.0;  // default battery at this node's average draw
  std::optional<ProfileKey> cell;

  double flr() const {
    return queued == 0 ? 0.0 : static_cast<double>(queued - succeeded) / static_cast<double>(queued);
  }
};

struct SimMetrics {
  std::string scenario;
  std::uint64_t seed = 0;
  Duration duration{};
  ModePowers powers;
  Duration wake_delay = kDefaultIdleWindow;
  Duration min_active = kDefaultActiveWindow;
  std::vector<NodeMetrics> nodes;

  FlrCount totals() const {
    FlrCount c;
    for (const auto& n : nodes) {
      c.queued += n.queued;
      c.succeeded += n.succeeded;
    }
    return c;
  }
};

inline std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

/// Lifetime in days of `battery` drained at a constant `average_mw`.
inline double lifetime_at_draw_days(const BatterySpec& battery, double average_mw) {
  if (average_mw <= 0) return 0.0;
  return battery.energy_j() * 1000.0 / average_mw / 86400.0;
}

inline SimMetrics compute_metrics(const Scenario& s, std::span<const TraceRecord> trace) {
  SimMetrics m;
  m.scenario = s.name;
  m.seed = s.seed;
  m.duration = s.duration;
  m.powers = s.powers;
  m.wake_delay = s.wake_delay;
  m.min_active = s.min_active;

  const auto energy = energy_from_trace(trace, s.powers, SimTime{s.duration});
  std::map<NodeAddress, std::size_t> at;
  for (const auto& spec : s.nodes) {
    NodeMetrics n;
    n.address = spec.address;
    n.role = spec.role;
    if (spec.role == Role::sensor) n.cell = cell_of(s, spec);
    if (auto it = energy.find(spec.address); it != energy.end()) n.energy_mj = it->second;
    n.lifetime_days = lifetime_at_draw_days(BatterySpec{}, n.energy_mj / to_seconds(s.duration));
    at[spec.address] = m.nodes.size();
    m.nodes.push_back(n);
  }

  std::map<NodeAddress, std::set<std::uint16_t>> first_copies;
  for (const auto& r : trace) {
    const auto* f = r.frame();
    if (!f) continue;
    auto self = at.find(r.node);
    auto owner = at.find(f->address);
    switch (r.direction) {
      case TraceDirection::queue:
        if (self != at.end()) ++m.nodes[self->second].queued;
        break;
      case TraceDirection::tx:
        if (self == at.end()) break;
        if (m.nodes[self->second].role != Role::sensor) {
          ++m.nodes[self->second].sent;
        } else if (f->kind == FrameKind::data) {
          ++m.nodes[self->second].sent;
          if (!first_copies[r.node].insert(f->sequence).second) ++m.nodes[self->second].retried;
        }
        break;
      case TraceDirection::sink:
        if (self != at.end()) ++m.nodes[self->second].delivered;
        if (owner != at.end() && owner != self) ++m.nodes[owner->second].delivered;
        break;
      case TraceDirection::collide:
        if (owner != at.end()) ++m.nodes[owner->second].collided;
        break;
      default: break;
    }
  }
  for (auto& n : m.nodes) {
    if (n.role != Role::sensor) continue;
    const std::set<NodeAddress> only{n.address};
    n.succeeded = count_flr(trace, &only).succeeded;
  }
  return m;
}

// ---------------------------------------------------------------------------
// metrics.txt
// ---------------------------------------------------------------------------

inline std::string format_cell(const std::optional<ProfileKey>& k) {
  if (!k) return "-";
  return std::string(to_string(k->environment)) + ":" + format_double("%g", k->distance_m) + ":" +
         format_double("%g", k->tx_height_m) + ":" + format_double("%g", k->rx_height_m) + ":" +
         (k->los ? "los" : "nlos") + ":" + (k->path == PathKind::direct ? "direct" : "via_relay");
}

inline std::string format_metrics(const SimMetrics& m) {
  std::string out;
  out += "scenario " + m.scenario + "\n";
  out += "seed " + std::to_string(m.seed) + "\n";
  out += "duration_s " + format_seconds(m.duration) + "\n";
  out += "powers_mw " + format_double("%.9g", m.powers.sleep_mw) + " " +
         format_double("%.9g", m.powers.idle_mw) + " " +
         format_double("%.9g", m.powers.active_mw) + "\n";
  out += "event_window_s " + format_seconds(m.wake_delay) + " " + format_seconds(m.min_active) +
         "\n";
  for (const auto& n : m.nodes) {
    out += "node " + to_hex(n.address) + " " + std::string(to_string(n.role));
    out += " queued=" + std::to_string(n.queued);
    out += " sent=" + std::to_string(n.sent);
    out += " retried=" + std::to_string(n.retried);
    out += " delivered=" + std::to_string(n.delivered);
    out += " succeeded=" + std::to_string(n.succeeded);
    out += " collided=" + std::to_string(n.collided);
    out += " flr=" + format_double("%.6f", n.flr());
    out += " energy_mj=" + format_double("%.6f", n.energy_mj);
    out += " lifetime_days=" + format_double("%.3f", n.lifetime_days);
    out += " cell=" + format_cell(n.cell);
    out += "\n";
  }
  const auto t = m.totals();
  out += "total queued=" + std::to_string(t.queued) + " succeeded=" + std::to_string(t.succeeded) +
         " flr=" + format_double("%.6f", t.flr()) + "\n";
  return out;
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline double metrics_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(Errc::parse_error, "bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(Errc::parse_error, "bad number '" + s + "'");
  }
}

inline std::optional<ProfileKey> parse_cell(const std::string& s) {
  if (s == "-") return std::nullopt;
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    auto colon = s.find(':', pos);
    parts.push_back(s.substr(pos, colon - pos));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() != 6) throw Error(Errc::parse_error, "bad cell '" + s + "'");
  auto env = environment_from_string(parts[0]);
  if (!env) throw Error(Errc::parse_error, "bad cell environment '" + parts[0] + "'");
  ProfileKey k;
  k.environment = *env;
  k.distance_m = metrics_number(parts[1]);
  k.tx_height_m = metrics_number(parts[2]);
  k.rx_height_m = metrics_number(parts[3]);
  k.los = parts[4] == "los";
  k.path = parts[5] == "via_relay" ? PathKind::via_relay : PathKind::direct;
  return k;
}

}  // namespace detail

inline SimMetrics parse_metrics(std::string_view text) {
  SimMetrics m;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    const auto w = detail::split_ws(line);
    if (w.empty()) continue;
    const auto need = [&](std::size_t n) {
      if (w.size() != n) throw Error(Errc::parse_error, "malformed metrics line: " + line);
    };
    if (w[0] == "scenario") {
      need(2);
      m.scenario = w[1];
    } else if (w[0] == "seed") {
      need(2);
      m.seed = std::stoull(w[1]);
    } else if (w[0] == "duration_s") {
      need(2);
      m.duration = from_seconds(detail::metrics_number(w[1]));
    } else if (w[0] == "powers_mw") {
      need(4);
      m.powers = {detail::metrics_number(w[1]), detail::metrics_number(w[2]),
                  detail::metrics_number(w[3])};
    } else if (w[0] == "event_window_s") {
      need(3);
      m.wake_delay = from_seconds(detail::metrics_number(w[1]));
      m.min_active = from_seconds(detail::metrics_number(w[2]));
    } else if (w[0] == "node") {
      need(13);
      NodeMetrics n;
      n.address = NodeAddress{static_cast<std::uint8_t>(std::stoul(w[1], nullptr, 16))};
      if (w[2] == "sensor")
        n.role = Role::sensor;
      else if (w[2] == "gateway")
        n.role = Role::gateway;
      else if (w[2] == "relay")
        n.role = Role::relay;
      else
        throw Error(Errc::parse_error, "bad role '" + w[2] + "'");
      for (std::size_t i = 3; i < w.size(); ++i) {
        const auto eq = w[i].find('=');
        if (eq == std::string::npos) throw Error(Errc::parse_error, "bad field '" + w[i] + "'");
        const auto key = w[i].substr(0, eq);
        const auto val = w[i].substr(eq + 1);
        const auto count = [&] { return static_cast<std::size_t>(detail::metrics_number(val)); };
        if (key == "queued") n.queued = count();
        else if (key == "sent") n.sent = count();
        else if (key == "retried") n.retried = count();
        else if (key == "delivered") n.delivered = count();
        else if (key == "succeeded") n.succeeded = count();
        else if (key == "collided") n.collided = count();
        else if (key == "energy_mj") n.energy_mj = detail::metrics_number(val);
        else if (key == "lifetime_days") n.lifetime_days = detail::metrics_number(val);
        else if (key == "cell") n.cell = detail::parse_cell(val);
        else if (key != "flr") throw Error(Errc::parse_error, "unknown field '" + key + "'");
      }
      m.nodes.push_back(n);
    } else if (w[0] != "total") {
      throw Error(Errc::parse_error, "unknown metrics line: " + line);
    }
  }
  if (m.scenario.empty()) throw Error(Errc::parse_error, "metrics without a scenario line");
  return m;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string format_percent(const FlrCount& c) {
  return format_double("%.1f%%", 100.0 * c.flr());
}

/// One table per (environment, gateway height, sight, path): rows are distances,
/// columns sensor heights. Counts from several runs of the same cell are pooled.
inline std::string format_flr_report(std::span<const SimMetrics> runs) {
  struct Cell {
    FlrCount count;
    std::size_t delivered = 0;
  };
  using TableKey = std::tuple<int, double, bool, int>;
  std::map<TableKey, std::map<double, std::map<double, Cell>>> tables;
  std::map<TableKey, std::set<double>> heights;
  for (const auto& m : runs)
    for (const auto& n : m.nodes) {
      if (n.role != Role::sensor || !n.cell) continue;
      const auto& k = *n.cell;
      const TableKey key{static_cast<int>(k.environment), k.rx_height_m, k.los,
                         static_cast<int>(k.path)};
      auto& c = tables[key][k.distance_m][k.tx_height_m];
      c.count.queued += n.queued;
      c.count.succeeded += n.succeeded;
      c.delivered += n.delivered;
      heights[key].insert(k.tx_height_m);
    }

  std::string out;
  for (const auto& [key, rows] : tables) {
    const auto& [env, gw_h, los, path] = key;
    if (!out.empty()) out += "\n";
    out += std::string(to_string(static_cast<Environment>(env))) + ", gateway at " +
           format_double("%g", gw_h) + " m, " + (los ? "line of sight" : "no line of sight") +
           (static_cast<PathKind>(path) == PathKind::via_relay ? ", through relay" : "") + "\n";
    std::string header = "distance    ";
    for (double h : heights[key]) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%-12s", ("SN " + format_double("%g", h) + " m").c_str());
      header += buf;
    }
    while (!header.empty() && header.back() == ' ') header.pop_back();
    out += header + "\n";
    for (const auto& [distance, cells] : rows) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%-12s", (format_double("%g", distance) + " m").c_str());
      std::string line = buf;
      for (double h : heights[key]) {
        std::string text = "-";
        if (auto it = cells.find(h); it != cells.end()) {
          const auto& c = it->second;
          text = (c.delivered == 0 && c.count.queued > 0) ? "no data" : format_percent(c.count);
        }
        std::snprintf(buf, sizeof buf, "%-12s", text.c_str());
        line += buf;
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + "\n";
    }
  }
  if (tables.empty()) out += "no sensor carries a measurement cell\n";
  out += "\n";
  for (const auto& m : runs) {
    const auto t = m.totals();
    out += m.scenario + " (seed " + std::to_string(m.seed) + "): " + format_percent(t) + " of " +
           std::to_string(t.queued) + " payloads lost\n";
  }
  return out;
}

inline std::string format_power_report(const SimMetrics& m, const BatterySpec& battery,
                                       double events_per_day) {
  battery.validate();
  const double idle_s = to_seconds(m.wake_delay);
  const double active_s = to_seconds(m.min_active);
  const double per_event = event_energy(idle_s, active_s, m.powers);
  const double days = estimate_lifetime_days(battery, events_per_day, per_event, m.powers.sleep_mw);

  std::string out;
  out += "mode powers: sleep " + format_double("%g", m.powers.sleep_mw) + " mW, idle " +
         format_double("%g", m.powers.idle_mw) + " mW, active " +
         format_double("%g", m.powers.active_mw) + " mW\n";
  out += "per-event energy: " + format_double("%.1f", per_event) + " mJ (" +
         format_double("%g", idle_s) + " s idle + " + format_double("%g", active_s) +
         " s active)\n";
  out += "battery: " + format_double("%g", battery.capacity_mah) + " mAh at " +
         format_double("%g", battery.voltage_v) + " V, " +
         format_double("%g", battery.usable_fraction * 100.0) + "% usable = " +
         format_double("%.1f", battery.energy_j()) + " J\n";
  out += "lifetime at " + format_double("%g", events_per_day) +
         " events/day: " + format_double("%.1f", days) + " days\n";
  out += "\nnode  role     energy_mj      avg_mw     lifetime_days\n";
  const double secs = to_seconds(m.duration);
  for (const auto& n : m.nodes) {
    const double avg = secs > 0 ? n.energy_mj / secs : 0.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-5s %-8s %-14.1f %-10.3f %.1f\n", to_hex(n.address).c_str(),
                  std::string(to_string(n.role)).c_str(), n.energy_mj, avg,
                  lifetime_at_draw_days(battery, avg));
    out += buf;
  }
  return out;
}

}  // namespace sparclora
