#pragma once

// Simulation trace, one record per line:
//
//   <time_s> <node> <direction> <kind> <seq> <mode>
//
// time_s has six decimals; node is two hex digits; mode is the node's power mode.
// Frame kinds are written as <kind>[+more][+relayed]@<addr_hex>. Backoff records
// carry retry/<window_us>/<delay_us> as kind and the attempt number as seq.
// Power records use "-" for kind and seq.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/power.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

enum class TraceDirection { tx, rx, drop, collide, sink, queue, power, backoff };

constexpr std::string_view to_string(TraceDirection d) {
  switch (d) {
    case TraceDirection::tx: return "tx";
    case TraceDirection::rx: return "rx";
    case TraceDirection::drop: return "drop";
    case TraceDirection::collide: return "collide";
    case TraceDirection::sink: return "sink";
    case TraceDirection::queue: return "queue";
    case TraceDirection::power: return "power";
    case TraceDirection::backoff: return "backoff";
  }
  return "?";
}

constexpr std::optional<TraceDirection> trace_direction_from_string(std::string_view s) {
  for (auto d : {TraceDirection::tx, TraceDirection::rx, TraceDirection::drop,
                 TraceDirection::collide, TraceDirection::sink, TraceDirection::queue,
                 TraceDirection::power, TraceDirection::backoff})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

struct FrameSummary {
  FrameKind kind = FrameKind::data;
  NodeAddress address;
  bool more = false;
  bool relayed = false;
  std::uint16_t sequence = 0;

  static FrameSummary of(const Frame& f) {
    return {f.kind(), f.address, f.control.more_messages, f.control.relayed, f.sequence};
  }

  std::string token() const {
    std::string s(to_string(kind));
    if (more) s += "+more";
    if (relayed) s += "+relayed";
    s += '@';
    s += to_hex(address);
    return s;
  }

  friend bool operator==(const FrameSummary&, const FrameSummary&) = default;
};

struct BackoffSummary {
  unsigned attempt = 0;
  Duration window{};
  Duration delay{};

  friend bool operator==(const BackoffSummary&, const BackoffSummary&) = default;
};

struct TraceRecord {
  SimTime time{};
  NodeAddress node;
  TraceDirection direction = TraceDirection::tx;
  PowerMode mode = PowerMode::sleep;
  std::variant<std::monostate, FrameSummary, BackoffSummary> detail;

  const FrameSummary* frame() const { return std::get_if<FrameSummary>(&detail); }
  const BackoffSummary* backoff() const { return std::get_if<BackoffSummary>(&detail); }

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

inline std::string format_record(const TraceRecord& r) {
  std::string kind = "-";
  std::string seq = "-";
  if (const auto* f = r.frame()) {
    kind = f->token();
    seq = std::to_string(f->sequence);
  } else if (const auto* b = r.backoff()) {
    kind = "retry/" + std::to_string(b->window.count()) + "/" + std::to_string(b->delay.count());
    seq = std::to_string(b->attempt);
  }
  std::string line = format_seconds(r.time);
  line += ' ';
  line += to_hex(r.node);
  line += ' ';
  line += to_string(r.direction);
  line += ' ';
  line += kind;
  line += ' ';
  line += seq;
  line += ' ';
  line += to_string(r.mode);
  return line;
}

inline std::string format_trace(std::span<const TraceRecord> trace) {
  std::string out;
  for (const auto& r : trace) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

namespace detail {

template <class Int>
Int parse_int(std::string_view s, int base, std::string_view what) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw Error(Errc::parse_error, "bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

inline SimTime parse_fixed_seconds(std::string_view s) {
  const auto dot = s.find('.');
  if (dot == std::string_view::npos || s.size() - dot - 1 != 6)
    throw Error(Errc::parse_error, "time must have six decimals: '" + std::string(s) + "'");
  const auto whole = parse_int<std::int64_t>(s.substr(0, dot), 10, "time");
  const auto frac = parse_int<std::int64_t>(s.substr(dot + 1), 10, "time");
  return SimTime{whole * 1'000'000 + frac};
}

inline FrameSummary parse_frame_token(std::string_view token, std::uint16_t seq) {
  const auto at = token.find('@');
  if (at == std::string_view::npos)
    throw Error(Errc::parse_error, "frame token without address: '" + std::string(token) + "'");
  FrameSummary f;
  f.sequence = seq;
  f.address = NodeAddress{parse_int<std::uint8_t>(token.substr(at + 1), 16, "address")};
  std::string_view head = token.substr(0, at);
  auto plus = head.find('+');
  auto kind = frame_kind_from_string(head.substr(0, plus));
  if (!kind) throw Error(Errc::parse_error, "unknown frame kind in '" + std::string(token) + "'");
  f.kind = *kind;
  while (plus != std::string_view::npos) {
    head = head.substr(plus + 1);
    plus = head.find('+');
    const auto flag = head.substr(0, plus);
    if (flag == "more")
      f.more = true;
    else if (flag == "relayed")
      f.relayed = true;
    else
      throw Error(Errc::parse_error, "unknown frame flag '" + std::string(flag) + "'");
  }
  return f;
}

}  // namespace detail

inline TraceRecord parse_record(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    auto next = line.find(' ', pos);
    if (next == std::string_view::npos) next = line.size();
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  if (fields.size() != 6)
    throw Error(Errc::parse_error, "trace line needs 6 fields: '" + std::string(line) + "'");

  TraceRecord r;
  r.time = detail::parse_fixed_seconds(fields[0]);
  r.node = NodeAddress{detail::parse_int<std::uint8_t>(fields[1], 16, "node")};
  auto dir = trace_direction_from_string(fields[2]);
  if (!dir) throw Error(Errc::parse_error, "unknown direction '" + std::string(fields[2]) + "'");
  r.direction = *dir;
  auto mode = power_mode_from_string(fields[5]);
  if (!mode) throw Error(Errc::parse_error, "unknown mode '" + std::string(fields[5]) + "'");
  r.mode = *mode;

  const auto kind = fields[3];
  if (kind == "-") {
    if (fields[4] != "-") throw Error(Errc::parse_error, "record without kind has a seq");
  } else if (kind.starts_with("retry/")) {
    const auto rest = kind.substr(6);
    const auto slash = rest.find('/');
    if (slash == std::string_view::npos) throw Error(Errc::parse_error, "bad retry token");
    BackoffSummary b;
    b.window = Duration{detail::parse_int<std::int64_t>(rest.substr(0, slash), 10, "window")};
    b.delay = Duration{detail::parse_int<std::int64_t>(rest.substr(slash + 1), 10, "delay")};
    b.attempt = detail::parse_int<unsigned>(fields[4], 10, "attempt");
    r.detail = b;
  } else {
    r.detail =
        detail::parse_frame_token(kind, detail::parse_int<std::uint16_t>(fields[4], 10, "seq"));
  }
  return r;
}

inline Trace parse_trace(std::string_view text) {
  Trace out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    if (nl > pos) out.push_back(parse_record(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame loss ratio
// ---------------------------------------------------------------------------

struct FlrCount {
  std::size_t queued = 0;     // payloads handed to sensor nodes
  std::size_t succeeded = 0;  // first copy reached the sink and its ACK reached the node

  double flr() const {
    return queued == 0 ? 0.0 : static_cast<double>(queued - succeeded) / static_cast<double>(queued);
  }
};

/// A payload counts as lost unless its first data transmission was published at the sink
/// and acknowledged back to the node before any retransmission. Payloads never sent count
/// as lost. `only` restricts the count to the given sensor addresses.
inline FlrCount count_flr(std::span<const TraceRecord> trace,
                          const std::set<NodeAddress>* only = nullptr) {
  struct State {
    bool queued = false;
    bool published = false;
    bool first_acked = false;
    int copies = 0;
  };
  std::map<std::pair<std::uint8_t, std::uint16_t>, State> payloads;
  for (const auto& r : trace) {
    const auto* f = r.frame();
    if (!f) continue;
    if (only && !only->contains(f->address)) continue;
    const auto key = std::make_pair(f->address.value, f->sequence);
    switch (r.direction) {
      case TraceDirection::queue: payloads[key].queued = true; break;
      case TraceDirection::sink: payloads[key].published = true; break;
      case TraceDirection::tx:
        if (f->kind == FrameKind::data && r.node == f->address) ++payloads[key].copies;
        break;
      case TraceDirection::rx:
        if (f->kind == FrameKind::data_ack && r.node == f->address) {
          auto& s = payloads[key];
          if (s.copies == 1) s.first_acked = true;
        }
        break;
      default: break;
    }
  }
  FlrCount c;
  for (const auto& [_, s] : payloads) {
    if (!s.queued) continue;
    ++c.queued;
    if (s.published && s.first_acked) ++c.succeeded;
  }
  return c;
}

inline double compute_flr(std::span<const TraceRecord> trace) { return count_flr(trace).flr(); }

/// Per-node energy rebuilt from power records, integrated up to `end`.
inline std::map<NodeAddress, double> energy_from_trace(std::span<const TraceRecord> trace,
                                                       const ModePowers& powers, SimTime end) {
  struct Open {
    PowerMode mode;
    SimTime since;
    double total = 0;
  };
  std::map<NodeAddress, Open> open;
  for (const auto& r : trace) {
    if (r.direction != TraceDirection::power) continue;
    auto [it, inserted] = open.try_emplace(r.node, Open{r.mode, r.time, 0.0});
    if (inserted) continue;
    it->second.total += powers.draw_mw(it->second.mode) * to_seconds(r.time - it->second.since);
    it->second.mode = r.mode;
    it->second.since = r.time;
  }
  std::map<NodeAddress, double> out;
  for (const auto& [node, o] : open)
    out[node] = o.total + powers.draw_mw(o.mode) * to_seconds(end - o.since);
  return out;
}

}  // namespace sparclora
